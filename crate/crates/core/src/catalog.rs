//! Named test pencils with known distances, the protocols that reproduce
//! them, and a timing benchmark.

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;

use crate::driver::{
    multistart, nearest_singular, nearest_singular_min_index, run_seed, MultiStartMode,
    SolveResult, StartStrategy,
};
use crate::error::{NspError, Result};
use crate::pencil::{Field, Pencil};
use crate::schur::{self, ExtremeIndex};
use crate::trust_region::SolverConfig;

/// Linearized model of a planar three-link mobile manipulator (8x8, real).
pub fn manipulator() -> Pencil {
    let m0 = [
        [18.7532, -7.94493, 7.94494],
        [-7.94493, 31.8182, -26.8182],
        [7.94494, -26.8182, 26.8182],
    ];
    let d0 = [
        [-1.52143, -1.55168, 1.55168],
        [3.22064, 3.28467, -3.28467],
        [-3.22064, -3.28467, 3.28467],
    ];
    let k0 = [
        [67.4894, 69.2393, -69.2393],
        [69.8124, 1.68624, -1.68617],
        [-69.8123, -1.68617, -68.2707],
    ];
    let f0 = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
    let mut a = DMatrix::<f64>::zeros(8, 8);
    let mut b = DMatrix::<f64>::zeros(8, 8);
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
        b[(i, i)] = 1.0;
        for j in 0..3 {
            a[(3 + i, j)] = -k0[i][j];
            a[(3 + i, 3 + j)] = -d0[i][j];
            b[(3 + i, 3 + j)] = m0[i][j];
        }
    }
    for r in 0..2 {
        for j in 0..3 {
            a[(6 + r, j)] = f0[r][j];
            a[(3 + j, 6 + r)] = f0[r][j];
        }
    }
    Pencil::real(&a, &b).expect("valid constants")
}

/// `diag(1, ε, 1) - λ N` with `N` the 3x3 upper shift.
pub fn epsilon_diagonal(eps: f64) -> Pencil {
    let a = [1.0, 0.0, 0.0, 0.0, eps, 0.0, 0.0, 0.0, 1.0];
    let b = [0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0];
    Pencil::from_real_rows(3, &a, &b).expect("valid constants")
}

/// `U_n - λ U_n` with `U_n` unit upper triangular with `-1` above the
/// diagonal. Its smallest singular value decays like `2^-n`.
pub fn upper_ones(n: usize) -> Pencil {
    let u = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Greater => 0.0,
    });
    Pencil::real(&u, &(-&u)).expect("valid constants")
}

/// `[1 1/ε; 0 1] - λ [0 1/ε; 0 1]`, at distance `ε` from singularity.
pub fn inverse_epsilon(eps: f64) -> Pencil {
    let a = [1.0, 1.0 / eps, 0.0, 1.0];
    let b = [0.0, -1.0 / eps, 0.0, -1.0];
    Pencil::from_real_rows(2, &a, &b).expect("valid constants")
}

fn small_pencil(a: [f64; 9]) -> Pencil {
    let b = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0];
    Pencil::from_real_rows(3, &a, &b).expect("valid constants")
}

/// First 3x3 pencil with `λ` in the (2,3) and (3,2) entries; its nearest
/// singular pencil with minimal index 1 is at distance `0.1155462894`.
pub fn small_index_first() -> Pencil {
    small_pencil([0.0, 0.04, 0.89, 0.15, -0.02, 0.0, 0.92, 0.11, 0.066])
}

/// Second 3x3 pencil; minimal index 2 is at distance `0.9435641675`.
pub fn small_index_second() -> Pencil {
    small_pencil([-1.79, 0.1, -0.6, 0.84, -0.54, 0.49, -0.89, 0.3, 0.74])
}

/// Best known distances of the manipulator pencil for right minimal index
/// `k = 0..8`.
pub const MANIPULATOR_INDEX_DISTANCES: [f64; 8] = [
    0.0112695, 0.0112680, 0.0111718, 0.0111731, 0.0456669, 0.0475071, 0.0477320, 0.0494382,
];

pub const MANIPULATOR_DISTANCE: f64 = 0.01117;
pub const SMALL_INDEX_FIRST_DISTANCE: f64 = 0.1155462894;
pub const SMALL_INDEX_SECOND_DISTANCE: f64 = 0.9435641675;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleId {
    Manipulator,
    ManipulatorIndexTable,
    EpsilonDiagonal,
    UpperOnes,
    InverseEpsilon,
    SmallIndex,
    BenchScaling,
}

impl ExampleId {
    pub const ALL: [ExampleId; 7] = [
        ExampleId::Manipulator,
        ExampleId::ManipulatorIndexTable,
        ExampleId::EpsilonDiagonal,
        ExampleId::UpperOnes,
        ExampleId::InverseEpsilon,
        ExampleId::SmallIndex,
        ExampleId::BenchScaling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleId::Manipulator => "manipulator",
            ExampleId::ManipulatorIndexTable => "manipulator-index-table",
            ExampleId::EpsilonDiagonal => "epsilon-diagonal",
            ExampleId::UpperOnes => "upper-ones",
            ExampleId::InverseEpsilon => "inverse-epsilon",
            ExampleId::SmallIndex => "small-index",
            ExampleId::BenchScaling => "bench-scaling",
        }
    }
}

impl std::str::FromStr for ExampleId {
    type Err = NspError;

    fn from_str(s: &str) -> Result<ExampleId> {
        ExampleId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| NspError::InvalidArgument(format!("unknown example '{s}'")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub label: String,
    pub target: f64,
    pub computed: f64,
    /// Allowed relative deviation, or the upper bound factor for one-sided
    /// checks.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleReport {
    pub id: ExampleId,
    pub rows: Vec<CheckRow>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl ExampleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct ExampleOptions {
    pub cfg: SolverConfig,
    pub seed: u64,
    /// Overrides the number of random starts of a protocol.
    pub starts: Option<usize>,
    pub bench_sizes: Vec<usize>,
    pub bench_reps: usize,
}

impl Default for ExampleOptions {
    fn default() -> ExampleOptions {
        ExampleOptions {
            cfg: SolverConfig::default(),
            seed: 2024,
            starts: None,
            bench_sizes: (20..=80).step_by(10).collect(),
            bench_reps: 3,
        }
    }
}

fn relative_row(label: impl Into<String>, target: f64, computed: f64, tol: f64) -> CheckRow {
    CheckRow {
        label: label.into(),
        target,
        computed,
        tolerance: tol,
        pass: (computed - target).abs() <= tol * target.abs(),
    }
}

fn range_row(label: impl Into<String>, lo: f64, hi: f64, computed: f64) -> CheckRow {
    CheckRow {
        label: label.into(),
        target: 0.5 * (lo + hi),
        computed,
        tolerance: 0.5 * (hi - lo) / (0.5 * (lo + hi)),
        pass: computed >= lo && computed <= hi,
    }
}

/// Best solve among an identity start and `starts` random starts.
pub fn best_direct(p: &Pencil, starts: usize, cfg: &SolverConfig, seed: u64) -> Result<SolveResult> {
    let identity = nearest_singular(p, cfg, StartStrategy::Identity)?;
    if starts == 0 {
        return Ok(identity);
    }
    let rep = multistart(p, starts, MultiStartMode::DirectRestarts, cfg, seed)?;
    Ok(if identity.distance < rep.best.distance { identity } else { rep.best })
}

/// Branch solves from successive random starts until the distance is at
/// most `stop_below`, up to `starts` solves. Returns the best result and
/// the number of solves used.
pub fn best_branch(
    p: &Pencil,
    k: usize,
    starts: usize,
    stop_below: f64,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<(SolveResult, usize)> {
    let mut best: Option<SolveResult> = None;
    let mut used = 0;
    for i in 0..starts.max(1) {
        used = i + 1;
        let start = StartStrategy::Random { seed: run_seed(seed, i) };
        let r = nearest_singular_min_index(p, k, cfg, start, None)?;
        if best.as_ref().is_none_or(|b| r.distance < b.distance) {
            best = Some(r);
        }
        if best.as_ref().is_some_and(|b| b.distance <= stop_below) {
            break;
        }
    }
    Ok((best.expect("at least one start"), used))
}

/// Runs the protocol of a named example.
pub fn run_example(id: ExampleId, opt: &ExampleOptions) -> Result<ExampleReport> {
    let cfg = &opt.cfg;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let mut csv = None;
    match id {
        ExampleId::Manipulator => {
            let starts = opt.starts.unwrap_or(32);
            let r = best_direct(&manipulator(), starts, cfg, opt.seed)?;
            rows.push(range_row(format!("best of identity + {starts} random starts"), 0.01110, 0.01120, r.distance));
            notes.push(format!("minimal index of best solve: {:?}", r.minimal_index));
        }
        ExampleId::ManipulatorIndexTable => {
            let p = manipulator();
            let n = p.n();
            let starts = opt.starts.unwrap_or(32);
            let mut lines = vec!["k,distance,target,method,solves".to_string()];
            let (d0, _) = schur::closed_form_extreme_index(&p, ExtremeIndex::Zero)?;
            let (dn, _) = schur::closed_form_extreme_index(&p, ExtremeIndex::Max)?;
            let t = MANIPULATOR_INDEX_DISTANCES;
            rows.push(abs_row("k = 0 (closed form)", t[0], d0, 1e-6));
            lines.push(format!("0,{d0:.9},{},svd,0", t[0]));
            for k in 1..n - 1 {
                let bound = t[k] * 1.01;
                let (r, used) = best_branch(&p, k, starts, bound, cfg, run_seed(opt.seed, 1000 * k))?;
                rows.push(CheckRow {
                    label: format!("k = {k} (branch, {used} starts)"),
                    target: t[k],
                    computed: r.distance,
                    tolerance: 0.01,
                    pass: r.distance <= bound,
                });
                lines.push(format!("{k},{:.9},{},branch,{used}", r.distance, t[k]));
            }
            rows.push(abs_row(format!("k = {} (closed form)", n - 1), t[n - 1], dn, 1e-6));
            lines.push(format!("{},{dn:.9},{},svd,0", n - 1, t[n - 1]));
            csv = Some(lines.join("\n") + "\n");
        }
        ExampleId::EpsilonDiagonal => {
            let eps = 1e-8;
            let p = epsilon_diagonal(eps);
            let r = nearest_singular(&p, cfg, StartStrategy::Identity)?;
            rows.push(relative_row("identity start", eps, r.distance, 1e-6));
            notes.push(format!("identity start used {} iterations", r.trace.iterations));
            let starts = opt.starts.unwrap_or(100);
            let rep = multistart(&p, starts, MultiStartMode::DirectRestarts, cfg, opt.seed)?;
            let clusters = cluster_distances(&rep.runs.iter().map(|r| r.distance).collect::<Vec<_>>(), 1e-6);
            let mut lines = vec!["distance,count".to_string()];
            for (d, c) in &clusters {
                lines.push(format!("{d:.12e},{c}"));
                notes.push(format!("cluster {d:.6e}: {c} of {starts} starts"));
            }
            let has = |t: f64| clusters.iter().any(|(d, _)| (d - t).abs() <= 1e-6 * t);
            rows.push(CheckRow {
                label: "random starts reach both local minima only".into(),
                target: 2.0,
                computed: clusters.len() as f64,
                tolerance: 0.0,
                pass: has(eps) && has(1.0) && clusters.len() == 2,
            });
            csv = Some(lines.join("\n") + "\n");
        }
        ExampleId::UpperOnes => {
            let p = upper_ones(20);
            let r = nearest_singular(&p, cfg, StartStrategy::Random { seed: opt.seed })?;
            rows.push(range_row("random start, n = 20", 3.9e-6, 4.1e-6, r.distance));
        }
        ExampleId::InverseEpsilon => {
            let starts = opt.starts.unwrap_or(5);
            let mut lines = vec!["eps,distance,relative_error".to_string()];
            for e in (1..=7).map(|j| 10f64.powi(-2 * j)) {
                let p = inverse_epsilon(e);
                let rep = multistart(&p, starts, MultiStartMode::DirectRestarts, cfg, opt.seed)?;
                let d = rep.best.distance;
                lines.push(format!("{e:e},{d:.12e},{:.3e}", (d - e).abs() / e));
                rows.push(relative_row(format!("eps = {e:e}, best of {starts}"), e, d, 0.01));
            }
            csv = Some(lines.join("\n") + "\n");
        }
        ExampleId::SmallIndex => {
            let starts = opt.starts.unwrap_or(20);
            for (p, k, target) in [
                (small_index_first(), 1, SMALL_INDEX_FIRST_DISTANCE),
                (small_index_second(), 2, SMALL_INDEX_SECOND_DISTANCE),
            ] {
                let (r, _) = best_branch(&p, k, starts, 0.0, cfg, opt.seed)?;
                rows.push(abs_row(format!("minimal index {k}, best of {starts}"), target, r.distance, 1e-8));
                let t = p.transformed(r.minimizer.q(), r.minimizer.z())?;
                let read = schur::extract_min_index(&t.project_triangular(k)?.projected, None)?;
                notes.push(format!("index read off the triangular form: {read}"));
            }
        }
        ExampleId::BenchScaling => {
            let b = bench_scaling(&opt.bench_sizes, opt.bench_reps, Field::Complex, cfg, opt.seed)?;
            notes.push(format!(
                "least-squares fit: seconds = {:.3e} * n^{:.3}",
                b.coefficient, b.exponent
            ));
            csv = Some(b.to_csv());
        }
    }
    Ok(ExampleReport { id, rows, notes, csv })
}

fn abs_row(label: impl Into<String>, target: f64, computed: f64, tol: f64) -> CheckRow {
    CheckRow {
        label: label.into(),
        target,
        computed,
        tolerance: tol / target.abs(),
        pass: (computed - target).abs() <= tol,
    }
}

/// Groups values whose relative difference is at most `rel_tol`; returns
/// `(representative, count)` in increasing order.
pub fn cluster_distances(values: &[f64], rel_tol: f64) -> Vec<(f64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((d, c)) if (v - *d).abs() <= rel_tol * d.abs().max(v.abs()) => *c += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub mean_seconds: f64,
    pub mean_iterations: f64,
    pub converged: usize,
    pub runs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares fit of `log t = log c + e log n`.
    pub exponent: f64,
    pub coefficient: f64,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,mean_seconds,mean_iterations,converged,runs\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6},{:.1},{},{}\n",
                r.n, r.mean_seconds, r.mean_iterations, r.converged, r.runs
            ));
        }
        s
    }
}

/// Times single random-start solves of random pencils of each size.
pub fn bench_scaling(
    sizes: &[usize],
    reps: usize,
    field: Field,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<BenchReport> {
    if sizes.is_empty() || reps == 0 {
        return Err(NspError::InvalidArgument("benchmark needs sizes and reps".into()));
    }
    let mut rows = Vec::new();
    for (si, &n) in sizes.iter().enumerate() {
        let mut secs = 0.0;
        let mut iters = 0.0;
        let mut converged = 0;
        for r in 0..reps {
            let s = run_seed(seed, si * 1000 + r);
            let p = Pencil::random(n, field, s)?;
            let res = nearest_singular(&p, cfg, StartStrategy::Random { seed: s })?;
            secs += res.trace.wall_time_seconds;
            iters += res.trace.iterations as f64;
            converged += usize::from(res.converged());
        }
        rows.push(BenchRow {
            n,
            mean_seconds: secs / reps as f64,
            mean_iterations: iters / reps as f64,
            converged,
            runs: reps,
        });
    }
    let (exponent, coefficient) = loglog_fit(
        &rows.iter().map(|r| (r.n as f64, r.mean_seconds)).collect::<Vec<_>>(),
    );
    Ok(BenchReport { rows, exponent, coefficient })
}

/// `(e, c)` minimizing `Σ (log y - log c - e log x)²`; NaN with fewer than
/// two usable points.
pub fn loglog_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let e = sxy / sxx;
    (e, (my - e * mx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manipulator_structure() {
        let p = manipulator();
        assert_eq!(p.n(), 8);
        assert_eq!(p.field(), Field::Real);
        assert_eq!(p.a()[(6, 0)].re, 1.0);
        assert_eq!(p.a()[(5, 7)].re, 1.0);
        assert_eq!(p.b()[(7, 7)].re, 0.0);
    }

    #[test]
    fn upper_ones_smallest_singular_value() {
        let p = upper_ones(20);
        let s = crate::linalg::singular_values(p.a());
        let d = std::f64::consts::SQRT_2 * s[19];
        assert!((d - 4.046e-6).abs() < 1e-9, "{d:e}");
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&n: &f64| (n, 3e-4 * n.powf(2.9))).collect();
        let (e, c) = loglog_fit(&pts);
        assert!((e - 2.9).abs() < 1e-12 && (c - 3e-4).abs() < 1e-15);
    }

    #[test]
    fn clusters_group_close_values() {
        let c = cluster_distances(&[1.0, 1e-8, 1.0 + 1e-9, 1e-8 * (1.0 + 1e-9)], 1e-6);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].1, 2);
    }

    #[test]
    fn ids_round_trip() {
        for id in ExampleId::ALL {
            assert_eq!(id.as_str().parse::<ExampleId>().unwrap(), id);
        }
    }
}
