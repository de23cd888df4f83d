//! Browser bindings. Every export takes plain numbers or strings and returns
//! a JSON document; failures come back as `{"error": "..."}` so the page
//! never has to catch exceptions.

use nsp_core::driver::{self, StartStrategy};
use nsp_core::objectives::{softmin_boltzmann, softmin_gradient};
use nsp_core::schur;
use nsp_core::{Field, Pencil, SolverConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest size the page may request; keeps a solve interactive.
pub const MAX_DEMO_N: usize = 12;

fn render(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn start_for(name: &str, p: &Pencil, seed: u64) -> Result<StartStrategy, String> {
    Ok(match name {
        "auto" => StartStrategy::default_for(p, seed),
        "identity" => StartStrategy::Identity,
        "random" => StartStrategy::Random { seed },
        "schur" => StartStrategy::SchurPermuted,
        other => return Err(format!("unknown start '{other}'")),
    })
}

fn solve_random_impl(n: usize, seed: u64, variant: &str, alpha: f64, start: &str) -> Result<Value, String> {
    if n == 0 || n > MAX_DEMO_N {
        return Err(format!("n must lie in 1..={MAX_DEMO_N}"));
    }
    let p = Pencil::random(n, Field::Complex, seed).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { max_outer_iters: 2000, ..SolverConfig::default() };
    let strategy = start_for(start, &p, seed.wrapping_add(1))?;
    let result = match variant {
        "direct" => driver::nearest_singular(&p, &cfg, strategy),
        "smoothed" => driver::nearest_singular_smoothed(&p, alpha, &cfg, strategy),
        other => return Err(format!("unknown variant '{other}'")),
    }
    .map_err(|e| e.to_string())?;
    let s = &result.singular_pencil;
    // Objective values are recorded for the normalized pencil.
    let unscale = 1.0 / (result.scale_factor * result.scale_factor);
    let history: Vec<f64> = result.trace.objective_history.iter().map(|f| f * unscale).collect();
    Ok(json!({
        "n": n,
        "distance": result.distance,
        "relative_distance": result.distance / p.frobenius_norm(),
        "iterations": result.trace.iterations,
        "status": format!("{:?}", result.trace.status),
        "history": history,
        "weights": s.diagonal_weights(),
        "minimal_index": result.minimal_index,
        "defect": result.singularity_defect,
    }))
}

/// Solves a random complex `n x n` pencil. `variant` is `direct` or
/// `smoothed` (then `alpha < 0` is used); `start` is `auto`, `identity`,
/// `random` or `schur`.
#[wasm_bindgen]
pub fn solve_random(n: u32, seed: u32, variant: &str, alpha: f64, start: &str) -> String {
    render(solve_random_impl(n as usize, u64::from(seed), variant, alpha, start))
}

fn softmin_curve_impl(weights: &str, log_min: f64, log_max: f64, points: usize) -> Result<Value, String> {
    let x: Vec<f64> = weights
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad weight '{}'", t.trim())))
        .collect::<Result<_, _>>()?;
    if x.is_empty() || x.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err("weights must be finite and non-negative".into());
    }
    if !(log_min.is_finite() && log_max.is_finite() && log_min < log_max) || points < 2 {
        return Err("need log_min < log_max and at least two points".into());
    }
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let rows: Vec<Value> = (0..points)
        .map(|i| {
            let e = log_min + (log_max - log_min) * i as f64 / (points - 1) as f64;
            let alpha = -(10f64.powf(e));
            json!({
                "alpha": alpha,
                "value": softmin_boltzmann(&x, alpha),
                "gradient": softmin_gradient(&x, alpha),
            })
        })
        .collect();
    Ok(json!({ "weights": x, "min": min, "curve": rows }))
}

/// Smoothed minimum of comma-separated `weights` for `alpha = -10^e`, with
/// `e` sampled on `points` values in `[log_min, log_max]`.
#[wasm_bindgen]
pub fn softmin_curve(weights: &str, log_min: f64, log_max: f64, points: u32) -> String {
    render(softmin_curve_impl(weights, log_min, log_max, points as usize))
}

fn extreme_indices_impl(n: usize, seed: u64) -> Result<Value, String> {
    if n < 2 || n > MAX_DEMO_N {
        return Err(format!("n must lie in 2..={MAX_DEMO_N}"));
    }
    let p = Pencil::random(n, Field::Complex, seed).map_err(|e| e.to_string())?;
    let (d0, _) = schur::closed_form_extreme_index(&p, schur::ExtremeIndex::Zero).map_err(|e| e.to_string())?;
    let (dmax, _) = schur::closed_form_extreme_index(&p, schur::ExtremeIndex::Max).map_err(|e| e.to_string())?;
    let direct = driver::nearest_singular(&p, &SolverConfig::default(), StartStrategy::Identity)
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "n": n,
        "index_zero": d0,
        "index_max": dmax,
        "direct": direct.distance,
        "direct_index": direct.minimal_index,
    }))
}

/// Closed-form distances to singular pencils with right minimal index `0`
/// and `n - 1` next to the unconstrained optimum from the identity start.
#[wasm_bindgen]
pub fn extreme_indices(n: u32, seed: u32) -> String {
    render(extreme_indices_impl(n as usize, u64::from(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn solve_reports_history_and_weights() {
        let v = parse(&solve_random(4, 7, "direct", 0.0, "identity"));
        assert!(v.get("error").is_none(), "{v}");
        let h = v["history"].as_array().unwrap();
        assert!(!h.is_empty());
        assert_eq!(v["weights"].as_array().unwrap().len(), 4);
        let d = v["distance"].as_f64().unwrap();
        let last = h.last().unwrap().as_f64().unwrap();
        assert!((last.sqrt() - d).abs() <= 1e-8 * d.max(1.0));
    }

    #[test]
    fn smoothed_solve_runs() {
        let v = parse(&solve_random(3, 1, "smoothed", -1e6, "random"));
        assert!(v["distance"].as_f64().unwrap() > 0.0, "{v}");
    }

    #[test]
    fn bad_inputs_become_error_documents() {
        assert!(parse(&solve_random(0, 1, "direct", 0.0, "auto")).get("error").is_some());
        assert!(parse(&solve_random(3, 1, "nope", 0.0, "auto")).get("error").is_some());
        assert!(parse(&solve_random(3, 1, "direct", 0.0, "nope")).get("error").is_some());
        assert!(parse(&softmin_curve("1,x", -2.0, 2.0, 5)).get("error").is_some());
        assert!(parse(&extreme_indices(1, 0)).get("error").is_some());
    }

    #[test]
    fn softmin_curve_approaches_the_minimum() {
        let v = parse(&softmin_curve("3, 1, 2", -3.0, 6.0, 10));
        let curve = v["curve"].as_array().unwrap();
        assert_eq!(curve.len(), 10);
        let first = curve[0]["value"].as_f64().unwrap();
        let last = curve[9]["value"].as_f64().unwrap();
        assert!((first - 2.0).abs() < 1e-2);
        assert!((last - 1.0).abs() < 1e-9);
    }

    #[test]
    fn extreme_indices_are_positive_distances() {
        let v = parse(&extreme_indices(5, 3));
        for key in ["index_zero", "index_max", "direct"] {
            let d = v[key].as_f64().unwrap();
            assert!(d.is_finite() && d > 0.0, "{v}");
        }
    }
}
