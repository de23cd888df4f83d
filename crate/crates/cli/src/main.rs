use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use nsp_core::catalog::{self, ExampleId, ExampleOptions};
use nsp_core::driver::{self, MultiStartMode, SolveResult, StartStrategy};
use nsp_core::schur::{self, ExtremeIndex};
use nsp_core::{Field, NspError, Pencil, SolverConfig};

const EXIT_ITERATION_CAP: u8 = 2;
const EXIT_INPUT: u8 = 3;

/// Distance to the nearest singular matrix pencil.
///
/// Exit codes: 0 converged (or example checks passed), 1 numerical failure,
/// 2 iteration cap or stalled solve (or failed example check), 3 input error.
#[derive(Parser)]
#[command(name = "nsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Auto,
    Identity,
    Random,
    Schur,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

impl From<FieldArg> for Field {
    fn from(f: FieldArg) -> Field {
        match f {
            FieldArg::Real => Field::Real,
            FieldArg::Complex => Field::Complex,
        }
    }
}

#[derive(clap::Args, Clone)]
struct SolverArgs {
    /// Absolute gradient-norm stopping tolerance.
    #[arg(long, default_value_t = 1e-10)]
    grad_tol: f64,
    /// Frobenius norm the pencil is scaled to before optimizing.
    #[arg(long, default_value_t = 100.0)]
    scale: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            grad_tol: self.grad_tol,
            scaling_norm: self.scale,
            max_outer_iters: self.max_iters,
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one pencil given as JSON.
    Solve {
        pencil: PathBuf,
        /// Number of starts; the best result is reported.
        #[arg(long, default_value_t = 1)]
        starts: usize,
        #[arg(long, value_enum, default_value_t = StartArg::Auto)]
        start: StartArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to singular pencils with this right minimal index (0-based).
        #[arg(long)]
        min_index: Option<usize>,
        /// Regularize a minimal-index result within this distance.
        #[arg(long, requires = "min_index")]
        eps: Option<f64>,
        /// Minimize the softmin-smoothed cost with this (negative) parameter.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "min_index")]
        smooth: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distances for every right minimal index, as CSV.
    SweepMinIndex {
        pencil: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a named example and print a JSON report.
    Example {
        /// manipulator, manipulator-index-table, epsilon-diagonal, upper-ones,
        /// inverse-epsilon, small-index or bench-scaling.
        id: String,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Where to write the CSV part of the report, if any.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time random solves over a range of sizes.
    Bench {
        /// `start:step:end` or a comma-separated list.
        #[arg(long, default_value = "20:10:80")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = FieldArg::Complex)]
        field: FieldArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a Gaussian random pencil as JSON.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = FieldArg::Complex)]
        field: FieldArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<NspError> for Failure {
    fn from(e: NspError) -> Failure {
        let code = match e {
            NspError::DimensionMismatch { .. }
            | NspError::IndexOutOfRange { .. }
            | NspError::NonRealEntry { .. }
            | NspError::InvalidArgument(_)
            | NspError::Parse(_) => EXIT_INPUT,
            _ => 1,
        };
        Failure { code, error: e.into() }
    }
}

fn input_error(e: anyhow::Error) -> Failure {
    Failure { code: EXIT_INPUT, error: e }
}

fn read_pencil(path: &Path) -> Result<Pencil, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input_error)?;
    Ok(Pencil::from_json_str(&text)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(|e| Failure { code: 1, error: e }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_sizes(s: &str) -> anyhow::Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    let sizes: Vec<usize> = if parts.len() == 3 {
        let (a, step, b): (usize, usize, usize) = (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
        if step == 0 {
            return Err(anyhow!("size step must be positive"));
        }
        (a..=b).step_by(step).collect()
    } else {
        s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>()?
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(anyhow!("sizes must be positive and non-empty"));
    }
    Ok(sizes)
}

fn strategy(arg: StartArg, p: &Pencil, seed: u64) -> StartStrategy {
    match arg {
        StartArg::Auto => StartStrategy::default_for(p, seed),
        StartArg::Identity => StartStrategy::Identity,
        StartArg::Random => StartStrategy::Random { seed },
        StartArg::Schur => StartStrategy::SchurPermuted,
    }
}

/// Best of `starts` solves; the first uses `seed`, later ones random seeds
/// derived from it.
fn best_of(
    starts: usize,
    first: StartStrategy,
    seed: u64,
    solve: impl Fn(StartStrategy) -> nsp_core::Result<SolveResult>,
) -> Result<SolveResult, Failure> {
    let mut best = solve(first)?;
    for i in 1..starts {
        let r = solve(StartStrategy::Random { seed: driver::run_seed(seed, i) })?;
        if r.distance < best.distance {
            best = r;
        }
    }
    Ok(best)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Solve { pencil, starts, start, seed, min_index, eps, smooth, solver, out } => {
            if starts == 0 {
                return Err(input_error(anyhow!("--starts must be at least 1")));
            }
            let p = read_pencil(&pencil)?;
            let cfg = solver.config();
            let first = strategy(start, &p, seed);
            let result = match (min_index, smooth) {
                (Some(k), _) => best_of(starts, first, seed, |s| {
                    driver::nearest_singular_min_index(&p, k, &cfg, s, eps)
                })?,
                (None, Some(alpha)) => best_of(starts, first, seed, |s| {
                    driver::nearest_singular_smoothed(&p, alpha, &cfg, s)
                })?,
                (None, None) if starts > 1 && matches!(start, StartArg::Auto | StartArg::Random) => {
                    driver::multistart(&p, starts, MultiStartMode::DirectRestarts, &cfg, seed)?.best
                }
                (None, None) => best_of(starts, first, seed, |s| driver::nearest_singular(&p, &cfg, s))?,
            };
            let text = serde_json::to_string_pretty(&result.to_json()).expect("json");
            emit(&text, out.as_deref())?;
            log::info!("distance {:e} ({:?})", result.distance, result.trace.status);
            Ok(if result.converged() { 0 } else { EXIT_ITERATION_CAP })
        }
        Command::SweepMinIndex { pencil, eps, starts, seed, solver, out } => {
            let p = read_pencil(&pencil)?;
            let cfg = solver.config();
            let n = p.n();
            let mut csv = String::from("k,distance,method,converged,defect\n");
            let mut all_converged = true;
            for k in 0..n {
                let extreme = if k == 0 {
                    Some(ExtremeIndex::Zero)
                } else if k == n - 1 {
                    Some(ExtremeIndex::Max)
                } else {
                    None
                };
                match extreme {
                    Some(which) => {
                        let (d, s) = schur::closed_form_extreme_index(&p, which)?;
                        let defect = s.singularity_defect(s.default_defect_samples())?;
                        csv.push_str(&format!("{k},{d:.12e},svd,true,{defect:.3e}\n"));
                    }
                    None => {
                        let r = best_of(starts, StartStrategy::Random { seed: driver::run_seed(seed, 1000 * k) }, driver::run_seed(seed, 1000 * k), |s| {
                            driver::nearest_singular_min_index(&p, k, &cfg, s, eps)
                        })?;
                        all_converged &= r.converged();
                        csv.push_str(&format!(
                            "{k},{:.12e},branch,{},{:.3e}\n",
                            r.distance,
                            r.converged(),
                            r.singularity_defect
                        ));
                    }
                }
            }
            emit(csv.trim_end(), out.as_deref())?;
            Ok(if all_converged { 0 } else { EXIT_ITERATION_CAP })
        }
        Command::Example { id, starts, seed, csv, out } => {
            let id: ExampleId = id.parse()?;
            let opt = ExampleOptions { starts, seed, ..ExampleOptions::default() };
            let report = catalog::run_example(id, &opt)?;
            if let (Some(path), Some(text)) = (csv.as_deref(), report.csv.as_deref()) {
                emit(text, Some(path))?;
            }
            let text = serde_json::to_string_pretty(&report.to_json()).expect("json");
            emit(&text, out.as_deref())?;
            Ok(if report.passed() { 0 } else { EXIT_ITERATION_CAP })
        }
        Command::Bench { sizes, reps, field, seed, out } => {
            let sizes = parse_sizes(&sizes).map_err(input_error)?;
            let report = catalog::bench_scaling(&sizes, reps, field.into(), &SolverConfig::default(), seed)?;
            emit(report.to_csv().trim_end(), out.as_deref())?;
            eprintln!("fit: seconds = {:.3e} * n^{:.3}", report.coefficient, report.exponent);
            Ok(0)
        }
        Command::Random { n, field, seed, out } => {
            let p = Pencil::random(n, field.into(), seed)?;
            emit(&p.to_json_string(), out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
