use std::path::Path;
use std::process::{Command, Output};

fn nsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsp")).args(args).output().expect("spawn nsp")
}

fn write_random(dir: &Path, n: usize, field: &str, seed: u64) -> String {
    let path = dir.join(format!("p{n}_{field}_{seed}.json"));
    let out = nsp(&["random", "--n", &n.to_string(), "--field", field, "--seed", &seed.to_string()]);
    assert!(out.status.success());
    std::fs::write(&path, &out.stdout).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn random_emits_a_readable_pencil() {
    let out = nsp(&["random", "--n", "3", "--field", "complex", "--seed", "5"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 3);
    assert_eq!(v["field"], "complex");
    assert_eq!(v["A"].as_array().unwrap().len(), 3);
}

#[test]
fn solve_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_random(dir.path(), 4, "real", 1);
    let out = nsp(&["solve", &p, "--start", "random", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["distance", "Q", "Z", "iterations", "grad_norm", "defect", "status", "minimal_index"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["distance"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_random(dir.path(), 3, "complex", 9);
    let target = dir.path().join("result.json");
    let out = nsp(&["solve", &p, "--min-index", "1", "--out", target.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(target).unwrap()).unwrap();
    assert_eq!(v["minimal_index"], 1);
}

#[test]
fn malformed_input_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 2, \"A\": [[1]]}").unwrap();
    assert_eq!(nsp(&["solve", bad.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(nsp(&["solve", "/nonexistent/pencil.json"]).status.code(), Some(3));
    assert_eq!(nsp(&["solve"]).status.code(), Some(3));
}

#[test]
fn iteration_cap_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_random(dir.path(), 6, "complex", 3);
    let out = nsp(&["solve", &p, "--start", "random", "--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["iterations"], 1);
}

#[test]
fn sweep_prints_a_csv_row_per_index() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_random(dir.path(), 3, "complex", 4);
    let out = nsp(&["sweep-min-index", &p, "--starts", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("k,"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn small_index_example_passes() {
    let out = nsp(&["example", "small-index"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn unknown_example_is_an_input_error() {
    assert_eq!(nsp(&["example", "no-such-example"]).status.code(), Some(3));
}
