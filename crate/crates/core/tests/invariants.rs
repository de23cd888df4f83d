use nsp_core::driver::{self, StartStrategy};
use nsp_core::linalg;
use nsp_core::objectives::softmin_boltzmann;
use nsp_core::trust_region::{LocalModel, Problem};
use nsp_core::{minimize, Field, ManifoldPoint, MatPair, Objective, Pencil, SolverConfig, Variant};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn field_of(real: bool) -> Field {
    if real {
        Field::Real
    } else {
        Field::Complex
    }
}

fn ambient(n: usize, complex: bool, seed: u64) -> MatPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MatPair::new(linalg::gaussian(n, n, complex, &mut rng), linalg::gaussian(n, n, complex, &mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_idempotent_and_tangent(n in 1usize..7, real: bool, seed: u64) {
        let x = ManifoldPoint::random(n, field_of(real), seed);
        let m = ambient(n, !real, seed ^ 1);
        let u = x.project_tangent(&m);
        prop_assert!(x.tangent_defect(&u) <= 1e-12 * (1.0 + m.norm()));
        let uu = x.project_tangent(&u);
        prop_assert!((&uu - &u).norm() <= 1e-12 * (1.0 + u.norm()));
        // Orthogonal projection: the residual is normal to the image.
        let r = &m - &u;
        prop_assert!(r.inner(&u).abs() <= 1e-10 * (1.0 + m.norm() * u.norm()));
    }

    #[test]
    fn retraction_stays_on_the_manifold(n in 1usize..8, real: bool, seed: u64, t in 0.0f64..5.0) {
        let x = ManifoldPoint::random(n, field_of(real), seed);
        let u = x.project_tangent(&ambient(n, !real, seed ^ 2)).scaled(t);
        let y = x.retract(&u).unwrap();
        prop_assert!(y.unitarity_defect() <= 1e-12);
        prop_assert_eq!(y.field(), x.field());
    }

    #[test]
    fn softmin_is_bounded_and_shift_equivariant(
        x in prop::collection::vec(0.0f64..100.0, 1..9),
        log_alpha in -3.0f64..8.0,
        c in -50.0f64..50.0,
    ) {
        let alpha = -(10f64.powf(log_alpha));
        let s = softmin_boltzmann(&x, alpha);
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s >= lo - 1e-12 * hi.abs() && s <= hi + 1e-12 * hi.abs());
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let s2 = softmin_boltzmann(&shifted, alpha);
        prop_assert!((s2 - (s + c)).abs() <= 1e-9 * (1.0 + hi.abs() + c.abs()));
    }

    #[test]
    fn triangular_projection_matches_direct_cost(n in 1usize..7, seed: u64) {
        let p = Pencil::random(n, Field::Complex, seed).unwrap();
        let x = ManifoldPoint::random(n, Field::Complex, seed ^ 3);
        let t = p.transformed(x.q(), x.z()).unwrap();
        let proj = t.nearest_triangular_singular();
        let f = Objective::direct(p).value(&x).unwrap().value;
        prop_assert!((proj.squared_distance - f).abs() <= 1e-12 * (1.0 + f));
        prop_assert!(proj.projected.is_upper_triangular(0.0));
        prop_assert_eq!(proj.projected.diagonal_weights()[proj.zero_index], 0.0);
        // Projecting again moves nothing.
        let again = proj.projected.project_triangular(proj.zero_index).unwrap();
        prop_assert_eq!(again.squared_distance, 0.0);
    }

    /// `<grad f, u>` is the derivative of `f` along the retraction curve.
    #[test]
    fn gradient_is_consistent_with_the_metric(n in 2usize..6, real: bool, seed: u64, branch in 0usize..6) {
        let field = field_of(real);
        let p = Pencil::random(n, field, seed).unwrap();
        let obj = Objective::new(p, Variant::Branch(branch % n)).unwrap();
        let x = ManifoldPoint::random(n, field, seed ^ 4);
        let u = x.project_tangent(&ambient(n, !real, seed ^ 5));
        let u = u.scaled(1.0 / u.norm());
        let g = obj.riemannian_gradient(&x).unwrap();
        let h = 1e-6;
        let fp = obj.value(&x.retract(&u.scaled(h)).unwrap()).unwrap().value;
        let fm = obj.value(&x.retract(&u.scaled(-h)).unwrap()).unwrap().value;
        let fd = (fp - fm) / (2.0 * h);
        prop_assert!((fd - g.inner(&u)).abs() <= 1e-6 * (1.0 + g.norm()), "fd {} vs {}", fd, g.inner(&u));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn objective_history_never_rises_beyond_the_rho_slack(n in 2usize..6, seed: u64, smooth: bool) {
        let p = Pencil::random(n, Field::Complex, seed).unwrap().scaled(100.0);
        let variant = if smooth { Variant::Smoothed { alpha: -1.0 } } else { Variant::Direct };
        let obj = Objective::new(p, variant).unwrap();
        let x0 = ManifoldPoint::random(n, Field::Complex, seed ^ 6);
        let cfg = SolverConfig::default();
        let (_, trace) = minimize(&obj, &x0, &cfg).unwrap();
        for w in trace.objective_history.windows(2) {
            let slack = w[0].abs() * f64::EPSILON * cfg.rho_regularization;
            prop_assert!(w[1] <= w[0] + slack, "{} -> {}", w[0], w[1]);
        }
        // Radius rules as recorded in the trace.
        let (init, max) = cfg.radii(x0.dimension());
        let mut radius = init;
        for s in &trace.steps {
            prop_assert!(s.radius <= max * (1.0 + 1e-12));
            if s.rho < 0.25 || s.model_decrease < 0.0 {
                prop_assert!((s.radius - 0.25 * radius).abs() <= 1e-12 * radius);
            }
            radius = s.radius;
        }
    }

    #[test]
    fn scaling_the_input_scales_the_distance(n in 2usize..6, seed: u64, log_c in -3.0f64..3.0) {
        let c = 10f64.powf(log_c);
        let p = Pencil::random(n, Field::Complex, seed).unwrap();
        let cfg = SolverConfig::default();
        let start = StartStrategy::Random { seed: seed ^ 7 };
        let r1 = driver::nearest_singular(&p, &cfg, start).unwrap();
        let r2 = driver::nearest_singular(&p.scaled(c), &cfg, start).unwrap();
        prop_assert!((r2.distance - c * r1.distance).abs() <= 1e-8 * c * r1.distance.max(1e-300));
    }

    /// Converged minimizers are not beaten by small random moves.
    #[test]
    fn converged_points_are_local_minima(n in 2usize..6, seed: u64) {
        let p = Pencil::random(n, Field::Complex, seed).unwrap();
        let r = driver::nearest_singular(&p, &SolverConfig::default(), StartStrategy::Random { seed }).unwrap();
        prop_assume!(r.converged());
        let obj = Objective::direct(p);
        let x = &r.minimizer;
        let f0 = obj.value(x).unwrap().value;
        for j in 0..20u64 {
            let u = x.project_tangent(&ambient(n, true, seed ^ (100 + j)));
            let u = u.scaled(1e-4 / u.norm());
            let f = obj.value(&x.retract(&u).unwrap()).unwrap().value;
            prop_assert!(f >= f0 * (1.0 - 1e-9), "probe {} lowered {} to {}", j, f0, f);
        }
    }
}

#[test]
fn local_model_agrees_with_objective_api() {
    let p = Pencil::random(4, Field::Complex, 11).unwrap();
    let obj = Objective::new(p, Variant::Smoothed { alpha: -2.0 }).unwrap();
    let x = ManifoldPoint::random(4, Field::Complex, 12);
    let local = obj.local(&x).unwrap();
    assert_eq!(local.cost(), obj.value(&x).unwrap().value);
    let g = local.gradient().unwrap();
    assert!((&g - &obj.riemannian_gradient(&x).unwrap()).norm() == 0.0);
    let u = x.project_tangent(&ambient(4, true, 13));
    let h1 = local.hessian_vec(&u).unwrap();
    let h2 = obj.riemannian_hessian_vec(&x, &u).unwrap();
    assert!((&h1 - &h2).norm() <= 1e-14 * h1.norm());
    let _ = Problem::local(&obj, &x).unwrap();
}
