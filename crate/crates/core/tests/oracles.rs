use nalgebra::DMatrix;
use num_complex::Complex64;
use nsp_core::driver::{self, MultiStartMode};
use nsp_core::linalg::{self, c64, CMat};
use nsp_core::schur::{self, ExtremeIndex};
use nsp_core::{Field, Pencil, SolverConfig};

/// Monic polynomial coefficients (constant term first) from its roots.
fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![c64(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![c64(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= r * ci;
        }
        c = next;
    }
    c
}

fn companion(roots: &[Complex64]) -> CMat {
    let n = roots.len();
    let c = poly_from_roots(roots);
    let mut m = CMat::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = c64(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i];
    }
    m
}

#[test]
fn qz_recovers_companion_roots() {
    let roots = [c64(1.0, 0.0), c64(-2.0, 0.0), c64(0.5, 1.0), c64(0.0, 3.0)];
    let c = companion(&roots);
    // det(A + λB) = 0 at λ = root when A = -C, B = I.
    let p = Pencil::complex(-c, linalg::identity(4)).unwrap();
    let f = schur::generalized_schur(&p).unwrap();
    assert!(f.residual(&p) <= 1e-12 * p.frobenius_norm());
    assert!(linalg::unitarity_defect(&f.q) < 1e-13 && linalg::unitarity_defect(&f.z) < 1e-13);
    let s = f.pencil();
    assert!(s.is_upper_triangular(0.0));
    let mut found: Vec<Complex64> = (0..4).map(|i| -s.a()[(i, i)] / s.b()[(i, i)]).collect();
    for r in roots {
        let (j, best) = found
            .iter()
            .enumerate()
            .map(|(j, z)| (j, (z - r).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        assert!(best < 1e-10, "root {r} missing, closest error {best}");
        found.remove(j);
    }
}

#[test]
fn qz_keeps_infinite_eigenvalues_at_zero_t() {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, 0.3, 1.0, -1.0, 0.2, 0.7, 3.0]);
    let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let p = Pencil::real(&a, &b).unwrap();
    let f = schur::generalized_schur(&p).unwrap();
    assert!(f.residual(&p) <= 1e-12 * p.frobenius_norm());
    let t = f.pencil();
    let zero_t = (0..3).filter(|&i| t.b()[(i, i)].norm() <= 1e-12).count();
    assert_eq!(zero_t, 1);
}

/// Smallest eigenvalue of a Hermitian matrix, through a route independent
/// of the singular value code.
fn min_hermitian_eigenvalue(h: CMat) -> f64 {
    h.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn extreme_index_closed_forms_match_normal_equations() {
    for seed in 0..5 {
        let p = Pencil::random(6, Field::Complex, seed).unwrap();
        let (a, b) = (p.a(), p.b());
        let gram_right = a.adjoint() * a + b.adjoint() * b;
        let gram_left = a * a.adjoint() + b * b.adjoint();
        let (d0, s0) = schur::closed_form_extreme_index(&p, ExtremeIndex::Zero).unwrap();
        let (dn, sn) = schur::closed_form_extreme_index(&p, ExtremeIndex::Max).unwrap();
        assert!((d0 * d0 - min_hermitian_eigenvalue(gram_right)).abs() <= 1e-10 * p.frobenius_norm().powi(2));
        assert!((dn * dn - min_hermitian_eigenvalue(gram_left)).abs() <= 1e-10 * p.frobenius_norm().powi(2));
        assert!((p.distance(&s0).unwrap() - d0).abs() <= 1e-12 * p.frobenius_norm());
        assert!((p.distance(&sn).unwrap() - dn).abs() <= 1e-12 * p.frobenius_norm());
        assert_eq!(schur::right_minimal_index(&s0, 1e-10), Some(0));
        assert!(s0.singularity_defect(8).unwrap() <= 1e-12);
        assert!(sn.singularity_defect(8).unwrap() <= 1e-12);
    }
}

/// Cost of the 2x2 real problem at rotation angles `(t, s)`.
fn rotation_cost(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64, s: f64) -> f64 {
    let rot = |x: f64| DMatrix::from_row_slice(2, 2, &[x.cos(), -x.sin(), x.sin(), x.cos()]);
    let (q, z) = (rot(t), rot(s));
    let (ta, tb) = (&q * a * &z, &q * b * &z);
    let lower = ta[(1, 0)].powi(2) + tb[(1, 0)].powi(2);
    let w0 = ta[(0, 0)].powi(2) + tb[(0, 0)].powi(2);
    let w1 = ta[(1, 1)].powi(2) + tb[(1, 1)].powi(2);
    lower + w0.min(w1)
}

/// Exhaustive grid over rotations followed by two zoomed grids. Reflections
/// only flip signs of rows or columns, which leave the cost unchanged, and
/// angles modulo pi suffice for the same reason.
fn grid_minimum(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let pi = std::f64::consts::PI;
    let (mut ct, mut cs, mut half) = (0.5 * pi, 0.5 * pi, 0.5 * pi);
    let mut best = f64::INFINITY;
    for _ in 0..6 {
        let m = 400;
        let (mut bt, mut bs) = (ct, cs);
        for i in 0..=m {
            for j in 0..=m {
                let t = ct - half + 2.0 * half * i as f64 / m as f64;
                let s = cs - half + 2.0 * half * j as f64 / m as f64;
                let f = rotation_cost(a, b, t, s);
                if f < best {
                    best = f;
                    bt = t;
                    bs = s;
                }
            }
        }
        ct = bt;
        cs = bs;
        half *= 8.0 / m as f64;
    }
    best.sqrt()
}

#[test]
fn two_by_two_real_solves_match_grid_search() {
    for seed in 0..4u64 {
        let p = Pencil::random(2, Field::Real, 40 + seed).unwrap();
        let a = schur::real_part(p.a());
        let b = schur::real_part(p.b());
        let oracle = grid_minimum(&a, &b);
        let rep = driver::multistart(&p, 12, MultiStartMode::DirectRestarts, &SolverConfig::default(), seed).unwrap();
        let d = rep.best.distance;
        assert!(rep.best.singular_pencil.max_abs_imag() == 0.0);
        assert!((d - oracle).abs() <= 1e-7 * oracle, "seed {seed}: solver {d}, grid {oracle}");
    }
}

#[test]
fn regularized_pencils_have_the_requested_minimal_index() {
    for (seed, k) in [(1u64, 0usize), (2, 1), (3, 2), (4, 3), (5, 4)] {
        let p = Pencil::random(5, Field::Complex, seed).unwrap();
        let t = schur::generalized_schur(&p).unwrap().pencil();
        let singular = t.project_triangular(k).unwrap().projected;
        let eps = 1e-3;
        let r = schur::regularize_min_index(&singular, k, eps, seed).unwrap();
        assert!(singular.distance(&r).unwrap() <= eps);
        assert_eq!(schur::extract_min_index(&r, None).unwrap(), k);
        assert_eq!(schur::right_minimal_index(&r, 1e-10), Some(k));
        assert!(r.singularity_defect(r.default_defect_samples()).unwrap() <= 1e-10);
    }
}

#[test]
fn one_by_one_distance_is_the_norm() {
    let p = Pencil::complex(CMat::from_element(1, 1, c64(3.0, -4.0)), CMat::from_element(1, 1, c64(0.0, 12.0))).unwrap();
    let r = driver::nearest_singular(&p, &SolverConfig::default(), driver::StartStrategy::Identity).unwrap();
    assert!((r.distance - 13.0).abs() <= 1e-12 * 13.0);
}
