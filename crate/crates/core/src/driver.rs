//! End-to-end solves: normalize, optimize, recover the singular pencil and
//! verify it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{NspError, Result};
use crate::io::matrix_to_json;
use crate::linalg::{self, CMat};
use crate::manifold::ManifoldPoint;
use crate::objectives::{Objective, Variant};
use crate::pencil::{Field, Pencil};
use crate::schur;
use crate::trust_region::{minimize, SolverConfig, SolverTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartStrategy {
    Identity,
    /// Haar-random factors drawn from the given seed.
    Random { seed: u64 },
    /// Lowest-cost of `count` Haar-random points.
    BestOfRandom { count: usize, seed: u64 },
    /// Best cyclic reordering of a generalized Schur form.
    SchurPermuted,
}

impl StartStrategy {
    /// Identity for pencils that are already upper triangular, a single
    /// random start otherwise.
    pub fn default_for(p: &Pencil, seed: u64) -> StartStrategy {
        if p.strict_lower_mass() == 0.0 {
            StartStrategy::Identity
        } else {
            StartStrategy::Random { seed }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Frobenius distance from the input to `singular_pencil`.
    pub distance: f64,
    pub singular_pencil: Pencil,
    /// `(Q, Z)` at which `Q S Z` and `Q T Z` are triangular.
    pub minimizer: ManifoldPoint,
    /// Zero diagonal position (0-based) of the recovered triangular form.
    pub minimal_index: Option<usize>,
    pub variant: Variant,
    pub trace: SolverTrace,
    pub singularity_defect: f64,
    pub start_strategy: StartStrategy,
    /// Factor the input was multiplied by before optimizing.
    pub scale_factor: f64,
    /// Times the softmin parameter was divided by ten after overflow.
    pub softenings: usize,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.trace.converged()
    }

    /// JSON report with the result schema used by the command line tool.
    pub fn to_json(&self) -> Value {
        let field = self.singular_pencil.field();
        let qfield = self.minimizer.field();
        json!({
            "distance": self.distance,
            "minimal_index": self.minimal_index,
            "S": matrix_to_json(self.singular_pencil.a(), field),
            "T": matrix_to_json(self.singular_pencil.b(), field),
            "Q": matrix_to_json(self.minimizer.q(), qfield),
            "Z": matrix_to_json(self.minimizer.z(), qfield),
            "iterations": self.trace.iterations,
            "grad_norm": self.trace.final_gradient_norm,
            "defect": self.singularity_defect,
            "seconds": self.trace.wall_time_seconds,
            "status": self.trace.status,
            "variant": self.variant,
            "start": self.start_strategy,
        })
    }
}

struct Prepared {
    scale: f64,
    scaled: Pencil,
}

fn prepare(p: &Pencil, cfg: &SolverConfig) -> Result<Prepared> {
    cfg.validate()?;
    let norm = p.frobenius_norm();
    let scale = if norm > 0.0 { cfg.scaling_norm / norm } else { 1.0 };
    Ok(Prepared { scale, scaled: p.scaled(scale) })
}

fn start_point(obj: &Objective, strategy: StartStrategy) -> Result<ManifoldPoint> {
    let p = obj.pencil();
    let (n, field) = (p.n(), p.field());
    match strategy {
        StartStrategy::Identity => Ok(ManifoldPoint::identity(n, field)),
        StartStrategy::Random { seed } => Ok(ManifoldPoint::random(n, field, seed)),
        StartStrategy::BestOfRandom { count, seed } => {
            if count == 0 {
                return Err(NspError::InvalidArgument("best-of-random needs count >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best: Option<(ManifoldPoint, f64)> = None;
            for _ in 0..count {
                let x = ManifoldPoint::random_with(n, field, &mut rng);
                let v = obj.value(&x)?.value;
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((x, v));
                }
            }
            Ok(best.expect("count >= 1").0)
        }
        StartStrategy::SchurPermuted => schur::permuted_schur_start(obj),
    }
}

/// Zero position and the triangular projection of `(QAZ, QBZ)` for the
/// unscaled pencil.
fn recover(p: &Pencil, x: &ManifoldPoint, branch: Option<usize>) -> Result<(Pencil, usize, f64)> {
    let t = p.transformed(x.q(), x.z())?;
    let proj = match branch {
        Some(k) => t.project_triangular(k)?,
        None => t.nearest_triangular_singular(),
    };
    Ok((proj.projected, proj.zero_index, proj.squared_distance))
}

/// `Q^H T Z^H`, kept real when every factor is real.
fn back_transform(tri: &Pencil, x: &ManifoldPoint, input_field: Field) -> Result<Pencil> {
    let q = x.q();
    let z = x.z();
    let undo = |m: &CMat| linalg::matmul_bh(&linalg::matmul_ah(q, m), z);
    let a = undo(tri.a());
    let b = undo(tri.b());
    let field = if input_field.is_real() && linalg::is_real(&a) && linalg::is_real(&b) {
        Field::Real
    } else {
        Field::Complex
    };
    Pencil::new(field, a, b)
}

fn finish(
    p: &Pencil,
    prepared: &Prepared,
    x: ManifoldPoint,
    trace: SolverTrace,
    variant: Variant,
    start: StartStrategy,
    softenings: usize,
) -> Result<SolveResult> {
    let branch = match variant {
        Variant::Branch(k) => Some(k),
        _ => None,
    };
    let (tri, k, sq) = recover(p, &x, branch)?;
    let singular = back_transform(&tri, &x, p.field())?;
    let defect = singular.singularity_defect(singular.default_defect_samples())?;
    Ok(SolveResult {
        distance: sq.sqrt(),
        singular_pencil: singular,
        minimizer: x,
        minimal_index: Some(k),
        variant,
        trace,
        singularity_defect: defect,
        start_strategy: start,
        scale_factor: prepared.scale,
        softenings,
    })
}

fn solve_variant(
    p: &Pencil,
    variant: Variant,
    cfg: &SolverConfig,
    start: StartStrategy,
) -> Result<(Prepared, ManifoldPoint, SolverTrace)> {
    let prepared = prepare(p, cfg)?;
    let obj = Objective::new(prepared.scaled.clone(), variant)?;
    let x0 = start_point(&obj, start)?;
    let (x, trace) = minimize(&obj, &x0, cfg)?;
    Ok((prepared, x, trace))
}

/// Nearest singular pencil by minimizing the direct cost.
pub fn nearest_singular(p: &Pencil, cfg: &SolverConfig, start: StartStrategy) -> Result<SolveResult> {
    let (prepared, x, trace) = solve_variant(p, Variant::Direct, cfg, start)?;
    log::debug!("direct solve: {:?} after {} iterations", trace.status, trace.iterations);
    finish(p, &prepared, x, trace, Variant::Direct, start, 0)
}

/// Nearest singular pencil whose triangular form vanishes at diagonal
/// position `k`, i.e. with right minimal index `k` for generic outputs.
/// With `eps`, the output is moved by at most `eps` so that the index is
/// exactly `k`.
pub fn nearest_singular_min_index(
    p: &Pencil,
    k: usize,
    cfg: &SolverConfig,
    start: StartStrategy,
    eps: Option<f64>,
) -> Result<SolveResult> {
    if k >= p.n() {
        return Err(NspError::IndexOutOfRange { index: k, n: p.n() });
    }
    let variant = Variant::Branch(k);
    let (prepared, x, trace) = solve_variant(p, variant, cfg, start)?;
    let mut result = finish(p, &prepared, x, trace, variant, start, 0)?;
    if let Some(eps) = eps {
        let t = p.transformed(result.minimizer.q(), result.minimizer.z())?;
        let tri = t.project_triangular(k)?.projected;
        let seed = match start {
            StartStrategy::Random { seed } | StartStrategy::BestOfRandom { seed, .. } => seed,
            _ => 0,
        };
        let reg = schur::regularize_min_index(&tri, k, eps, seed)?;
        result.distance = t.distance(&reg)?;
        result.singular_pencil = back_transform(&reg, &result.minimizer, p.field())?;
        result.singularity_defect = result
            .singular_pencil
            .singularity_defect(result.singular_pencil.default_defect_samples())?;
    }
    Ok(result)
}

/// Minimizes the softmin-smoothed cost; the reported distance is that of the
/// direct cost at the minimizer. The parameter is divided by ten whenever
/// the smoothed cost overflows.
pub fn nearest_singular_smoothed(
    p: &Pencil,
    alpha: f64,
    cfg: &SolverConfig,
    start: StartStrategy,
) -> Result<SolveResult> {
    let mut alpha = alpha;
    let mut softenings = 0;
    loop {
        let variant = Variant::Smoothed { alpha };
        match solve_variant(p, variant, cfg, start) {
            Ok((prepared, x, trace)) => {
                return finish(p, &prepared, x, trace, variant, start, softenings);
            }
            Err(NspError::NonFinite(what)) if softenings < 30 => {
                log::debug!("softmin overflow in {what}; softening alpha {alpha:e}");
                alpha /= 10.0;
                softenings += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiStartMode {
    /// Independent direct solves from random starts.
    DirectRestarts,
    /// One branch solve per diagonal position.
    BranchSweep,
}

#[derive(Clone, Debug)]
pub struct MultiStartReport {
    pub best: SolveResult,
    /// Successful runs sorted by distance.
    pub runs: Vec<SolveResult>,
    pub failures: Vec<(usize, NspError)>,
}

/// Seed of run `i` in a campaign with the given master seed.
pub fn run_seed(master: u64, i: usize) -> u64 {
    master.wrapping_add(i as u64)
}

#[cfg(feature = "parallel")]
fn run_all<F>(count: usize, f: F) -> Vec<Result<SolveResult>>
where
    F: Fn(usize) -> Result<SolveResult> + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all<F>(count: usize, f: F) -> Vec<Result<SolveResult>>
where
    F: Fn(usize) -> Result<SolveResult>,
{
    (0..count).map(f).collect()
}

/// Several solves of the same pencil. `DirectRestarts` runs `m` direct
/// solves from random starts seeded `seed, seed + 1, ...`; `BranchSweep`
/// runs every branch `k = 0..n` once (ignoring `m`) with seeds
/// `seed + k`.
pub fn multistart(
    p: &Pencil,
    m: usize,
    mode: MultiStartMode,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<MultiStartReport> {
    let outcomes = match mode {
        MultiStartMode::DirectRestarts => {
            if m == 0 {
                return Err(NspError::InvalidArgument("multistart needs m >= 1".into()));
            }
            run_all(m, |i| {
                nearest_singular(p, cfg, StartStrategy::Random { seed: run_seed(seed, i) })
            })
        }
        MultiStartMode::BranchSweep => run_all(p.n(), |k| {
            let start = StartStrategy::Random { seed: run_seed(seed, k) };
            nearest_singular_min_index(p, k, cfg, start, None)
        }),
    };
    let total = outcomes.len();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(r) => runs.push(r),
            Err(e) => failures.push((i, e)),
        }
    }
    if runs.is_empty() {
        return Err(NspError::AllRunsFailed(total));
    }
    runs.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(MultiStartReport { best: runs[0].clone(), runs, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_singular_input_is_already_optimal() {
        let p = Pencil::random(5, Field::Complex, 3).unwrap();
        let t = crate::schur::generalized_schur(&p).unwrap().pencil();
        let s = t.project_triangular(2).unwrap().projected;
        let r = nearest_singular(&s, &SolverConfig::default(), StartStrategy::Identity).unwrap();
        assert!(r.distance <= 1e-12);
        assert_eq!(r.trace.iterations, 0);
    }

    #[test]
    fn scaling_changes_only_the_distance() {
        let p = Pencil::random(4, Field::Complex, 8).unwrap();
        let cfg = SolverConfig::default();
        let start = StartStrategy::Random { seed: 4 };
        let r1 = nearest_singular(&p, &cfg, start).unwrap();
        let r2 = nearest_singular(&p.scaled(1024.0), &cfg, start).unwrap();
        assert!((r2.distance - 1024.0 * r1.distance).abs() <= 1e-12 * r2.distance);
        assert_eq!(r1.minimizer, r2.minimizer);
    }

    #[test]
    fn one_run_campaign_matches_single_solve() {
        let p = Pencil::random(4, Field::Real, 2).unwrap();
        let cfg = SolverConfig::default();
        let rep = multistart(&p, 1, MultiStartMode::DirectRestarts, &cfg, 77).unwrap();
        let single = nearest_singular(&p, &cfg, StartStrategy::Random { seed: 77 }).unwrap();
        assert_eq!(rep.best.distance, single.distance);
        assert_eq!(rep.best.minimizer, single.minimizer);
    }

    #[test]
    fn json_report_has_schema_keys() {
        let p = Pencil::random(3, Field::Complex, 1).unwrap();
        let r = nearest_singular(&p, &SolverConfig::default(), StartStrategy::Identity).unwrap();
        let v = r.to_json();
        for key in ["distance", "minimal_index", "S", "T", "Q", "Z", "iterations", "grad_norm", "defect", "seconds"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
