//! Riemannian trust-region method with a truncated conjugate-gradient
//! (Steihaug-Toint) inner solver.
//!
//! The solver only needs a [`Problem`] that produces a [`LocalModel`] at
//! each point: cost, Riemannian gradient and Hessian-vector products.

use serde::{Deserialize, Serialize};

use crate::error::{NspError, Result};
use crate::manifold::{ManifoldPoint, MatPair};

/// Cost, gradient and Hessian at a fixed point.
pub trait LocalModel {
    fn cost(&self) -> f64;
    fn point(&self) -> &ManifoldPoint;
    /// Riemannian gradient (a tangent vector).
    fn gradient(&self) -> Result<MatPair>;
    /// Riemannian Hessian applied to a tangent vector.
    fn hessian_vec(&self, u: &MatPair) -> Result<MatPair>;
    /// The cost is not differentiable here and a one-sided branch is used.
    fn nondifferentiable(&self) -> bool {
        false
    }
    /// Natural size of the gradient at this point, used by the relative
    /// stopping test. Infinite disables that test.
    fn gradient_scale(&self) -> f64 {
        f64::INFINITY
    }
}

pub trait Problem {
    type Local<'a>: LocalModel
    where
        Self: 'a;

    fn local<'a>(&'a self, x: &ManifoldPoint) -> Result<Self::Local<'a>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Absolute stopping tolerance on the Riemannian gradient norm.
    pub grad_tol: f64,
    /// Once `grad_tol` is met, keep iterating while the gradient exceeds
    /// this fraction of the model's `gradient_scale`. Matters only for
    /// nearly singular inputs, whose cost is far below the absolute scale.
    /// A run that stalls in this phase still counts as converged.
    pub rel_grad_tol: f64,
    pub max_outer_iters: usize,
    /// Inner iteration cap; defaults to `4 n^2`, the real dimension of the
    /// ambient pair of complex matrices.
    pub max_inner_iters: Option<usize>,
    /// Defaults to `max_radius / 8`.
    pub initial_radius: Option<f64>,
    /// Defaults to the square root of the manifold dimension.
    pub max_radius: Option<f64>,
    /// Steps with `rho` above this value are accepted.
    pub rho_accept: f64,
    /// Linear residual reduction factor in the inner solver.
    pub kappa: f64,
    /// Superlinear exponent of the inner stopping rule.
    pub theta: f64,
    /// Multiple of `|f| * eps` added to both sides of `rho`. Relative, so
    /// that pencils very close to singular still get meaningful ratios.
    pub rho_regularization: f64,
    /// Frobenius norm the driver rescales pencils to.
    pub scaling_norm: f64,
    /// Stop as stalled once the radius falls below this fraction of the
    /// maximal radius.
    pub min_radius_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            grad_tol: 1e-10,
            rel_grad_tol: 1e-6,
            max_outer_iters: 10_000,
            max_inner_iters: None,
            initial_radius: None,
            max_radius: None,
            rho_accept: 0.1,
            kappa: 0.1,
            theta: 1.0,
            rho_regularization: 1e3,
            scaling_norm: 100.0,
            min_radius_fraction: 1e-16,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(NspError::InvalidArgument(what.to_string()));
        if !(self.grad_tol >= 0.0) || !(self.rel_grad_tol >= 0.0) {
            return bad("gradient tolerances must be non-negative");
        }
        if !(self.rho_accept >= 0.0 && self.rho_accept < 0.25) {
            return bad("rho_accept must lie in [0, 1/4)");
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) || !(self.theta > 0.0) {
            return bad("kappa must lie in (0, 1) and theta must be positive");
        }
        if !(self.scaling_norm > 0.0 && self.scaling_norm.is_finite()) {
            return bad("scaling_norm must be positive");
        }
        if let Some(r) = self.max_radius {
            if !(r > 0.0) {
                return bad("max_radius must be positive");
            }
        }
        if let Some(r) = self.initial_radius {
            if !(r > 0.0) {
                return bad("initial_radius must be positive");
            }
        }
        Ok(())
    }

    /// `(initial, maximal)` radius for a manifold of the given dimension.
    pub fn radii(&self, dimension: usize) -> (f64, f64) {
        let max = self.max_radius.unwrap_or((dimension.max(1) as f64).sqrt());
        let init = self.initial_radius.unwrap_or(max / 8.0).min(max);
        (init, max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStop {
    /// Residual tolerance reached inside the region.
    Converged,
    ExceededRadius,
    NegativeCurvature,
    ModelIncreased,
    MaxInnerIterations,
    /// Cauchy point replaced a worse inner iterate.
    CauchyFallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIterations,
    /// Trust radius collapsed without meeting the gradient tolerance.
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub radius: f64,
    pub rho: f64,
    pub accepted: bool,
    pub inner_stop: InnerStop,
    pub inner_iterations: usize,
    pub model_decrease: f64,
    pub cauchy_decrease: f64,
    pub cost: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterations: usize,
    pub final_gradient_norm: f64,
    /// Cost at the start and after every accepted step.
    pub objective_history: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub wall_time_seconds: f64,
    pub status: SolverStatus,
    /// Points at which the direct cost was not differentiable.
    pub nondifferentiable_points: usize,
}

impl SolverTrace {
    pub fn converged(&self) -> bool {
        self.status == SolverStatus::Converged
    }

    /// Largest increase of the cost between consecutive accepted iterates.
    pub fn max_increase(&self) -> f64 {
        self.objective_history
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct TcgOutcome {
    pub step: MatPair,
    pub hstep: MatPair,
    pub stop: InnerStop,
    pub inner_iterations: usize,
    /// `-m(step)` for the quadratic model `m(u) = <g,u> + <Hu,u>/2`.
    pub model_decrease: f64,
    /// `-m` at the Cauchy point.
    pub cauchy_decrease: f64,
}

fn model_decrease(g: &MatPair, u: &MatPair, hu: &MatPair) -> f64 {
    -(g.inner(u) + 0.5 * u.inner(hu))
}

/// Approximately minimizes the quadratic model in the ball of radius
/// `radius`. The returned step is never worse than the Cauchy point.
pub fn tcg_subproblem<L: LocalModel + ?Sized>(
    local: &L,
    grad: &MatPair,
    radius: f64,
    cfg: &SolverConfig,
    max_inner: usize,
) -> Result<TcgOutcome> {
    let x = local.point();
    let n = grad.n();
    let gnorm = grad.norm();
    let mut eta = MatPair::zeros(n);
    let mut heta = MatPair::zeros(n);
    if gnorm == 0.0 {
        return Ok(TcgOutcome {
            step: eta,
            hstep: heta,
            stop: InnerStop::Converged,
            inner_iterations: 0,
            model_decrease: 0.0,
            cauchy_decrease: 0.0,
        });
    }
    let mut r = grad.clone();
    let mut rr = r.inner(&r);
    let r0 = rr.sqrt();
    let target = r0 * r0.powf(cfg.theta).min(cfg.kappa);
    let mut delta = -&r;
    let mut e_pe = 0.0;
    let mut e_pd = 0.0;
    let mut d_pd = rr;
    let mut model = 0.0;
    let mut stop = InnerStop::MaxInnerIterations;
    let mut cauchy: Option<(MatPair, MatPair, f64)> = None;
    let mut iters = 0;

    for j in 0..max_inner.max(1) {
        iters = j + 1;
        let hdelta = local.hessian_vec(&delta)?;
        let d_hd = delta.inner(&hdelta);

        if j == 0 {
            // Cauchy point along -g: tau * radius / |g| scaled.
            let ghg = d_hd;
            let tau = if ghg <= 0.0 {
                1.0
            } else {
                (gnorm.powi(3) / (radius * ghg)).min(1.0)
            };
            let s = tau * radius / gnorm;
            let cp = delta.scaled(s);
            let hcp = hdelta.scaled(s);
            let dec = model_decrease(grad, &cp, &hcp);
            cauchy = Some((cp, hcp, dec));
        }

        let alpha = rr / d_hd;
        let e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd;

        if d_hd <= 0.0 || e_pe_new >= radius * radius || !alpha.is_finite() {
            let disc = (e_pd * e_pd + d_pd * (radius * radius - e_pe)).max(0.0);
            let tau = (-e_pd + disc.sqrt()) / d_pd;
            eta.axpy(tau, &delta);
            heta.axpy(tau, &hdelta);
            stop = if d_hd <= 0.0 {
                InnerStop::NegativeCurvature
            } else {
                InnerStop::ExceededRadius
            };
            break;
        }

        let mut eta_new = eta.clone();
        eta_new.axpy(alpha, &delta);
        let mut heta_new = heta.clone();
        heta_new.axpy(alpha, &hdelta);
        let model_new = -model_decrease(grad, &eta_new, &heta_new);
        if model_new >= model {
            stop = InnerStop::ModelIncreased;
            break;
        }
        eta = eta_new;
        heta = heta_new;
        model = model_new;
        e_pe = e_pe_new;

        r.axpy(alpha, &hdelta);
        // Keep the residual in the tangent space despite rounding.
        r = x.project_tangent(&r);
        let rr_new = r.inner(&r);
        if rr_new.sqrt() <= target {
            stop = InnerStop::Converged;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        delta = &delta.scaled(beta) - &r;
        delta = x.project_tangent(&delta);
        e_pd = beta * (e_pd + alpha * d_pd);
        d_pd = rr + beta * beta * d_pd;
    }

    let mut dec = model_decrease(grad, &eta, &heta);
    let cauchy_decrease = cauchy.as_ref().map(|c| c.2).unwrap_or(0.0);
    if let Some((cp, hcp, cdec)) = cauchy {
        if !(dec >= cdec) {
            eta = cp;
            heta = hcp;
            dec = cdec;
            stop = InnerStop::CauchyFallback;
        }
    }
    Ok(TcgOutcome {
        step: eta,
        hstep: heta,
        stop,
        inner_iterations: iters,
        model_decrease: dec,
        cauchy_decrease,
    })
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> impl Fn() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn clock() -> impl Fn() -> f64 {
    || 0.0
}

/// Runs the trust-region method from `x0`.
pub fn minimize<P: Problem + ?Sized>(
    problem: &P,
    x0: &ManifoldPoint,
    cfg: &SolverConfig,
) -> Result<(ManifoldPoint, SolverTrace)> {
    cfg.validate()?;
    let elapsed = clock();
    let dim = x0.dimension();
    let (mut radius, max_radius) = cfg.radii(dim);
    let n = x0.n();
    let max_inner = cfg.max_inner_iters.unwrap_or(4 * n * n).max(1);

    let mut local = problem.local(x0)?;
    let mut fx = local.cost();
    let mut grad = local.gradient()?;
    let mut gnorm = grad.norm();
    let mut nondiff = usize::from(local.nondifferentiable());
    let mut history = vec![fx];
    let mut steps = Vec::new();
    let mut status = SolverStatus::MaxIterations;
    let mut iterations = 0;

    loop {
        let tol_met = gnorm <= cfg.grad_tol;
        if tol_met && gnorm <= cfg.rel_grad_tol * local.gradient_scale() {
            status = SolverStatus::Converged;
            break;
        }
        if iterations >= cfg.max_outer_iters {
            if tol_met {
                status = SolverStatus::Converged;
            }
            break;
        }
        if radius < cfg.min_radius_fraction * max_radius {
            status = if tol_met { SolverStatus::Converged } else { SolverStatus::Stalled };
            break;
        }
        iterations += 1;

        let tcg = tcg_subproblem(&local, &grad, radius, cfg, max_inner)?;
        let candidate = match local.point().retract(&tcg.step) {
            Ok(y) => Some(y),
            Err(NspError::RetractionFailed) => None,
            Err(e) => return Err(e),
        };
        let proposal = match candidate {
            Some(y) => Some(problem.local(&y)?),
            None => None,
        };
        let reg = fx.abs().max(f64::MIN_POSITIVE) * f64::EPSILON * cfg.rho_regularization;
        let (rho, f_new) = match &proposal {
            Some(p) => {
                let f_new = p.cost();
                ((fx - f_new + reg) / (tcg.model_decrease + reg), f_new)
            }
            None => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let model_ok = tcg.model_decrease >= 0.0;

        if !(rho >= 0.25) || !model_ok {
            radius *= 0.25;
        } else if rho > 0.75
            && matches!(tcg.stop, InnerStop::ExceededRadius | InnerStop::NegativeCurvature)
        {
            radius = (2.0 * radius).min(max_radius);
        }

        let accepted = model_ok && rho > cfg.rho_accept;
        if accepted {
            local = proposal.expect("accepted step has a proposal");
            fx = f_new;
            grad = local.gradient()?;
            gnorm = grad.norm();
            nondiff += usize::from(local.nondifferentiable());
            history.push(fx);
        }
        log::trace!(
            "iter {iterations}: f={fx:.6e} |g|={gnorm:.3e} rho={rho:.3} radius={radius:.3e} {:?}",
            tcg.stop
        );
        steps.push(StepRecord {
            radius,
            rho,
            accepted,
            inner_stop: tcg.stop,
            inner_iterations: tcg.inner_iterations,
            model_decrease: tcg.model_decrease,
            cauchy_decrease: tcg.cauchy_decrease,
            cost: fx,
            grad_norm: gnorm,
        });
    }

    if nondiff > 0 {
        log::debug!("{nondiff} iterates had tied minimal diagonal weights");
    }
    let x = local.point().clone();
    Ok((
        x,
        SolverTrace {
            iterations,
            final_gradient_norm: gnorm,
            objective_history: history,
            steps,
            wall_time_seconds: elapsed(),
            status,
            nondifferentiable_points: nondiff,
        },
    ))
}
