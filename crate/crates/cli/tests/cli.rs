use std::path::Path;
use std::process::Command;

use serde_json::Value;

const EXP_02: &str = r#"{"schema_version": 1, "map": {"family": "exponential", "params": [[0.2, 0.0]]}}"#;
const EXP_1: &str = r#"{"schema_version": 1, "map": {"family": "exponential", "params": [[1.0, 0.0]]}}"#;

fn hypdim(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_hypdim"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn hypdim");
    out.status.code().expect("exit code")
}

fn run(pipeline: &str, config: &str, dir: &Path, extra: &[&str]) -> (i32, Option<Value>) {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut args = vec![pipeline, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let code = hypdim(&args);
    let report = std::fs::read_to_string(out.join("report.json"))
        .ok()
        .map(|s| serde_json::from_str(&s).unwrap());
    (code, report)
}

#[test]
fn escaping_exponential_is_a_gate_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run("verify", EXP_1, dir.path(), &[]);
    assert_eq!(code, 2);
    let r = report.unwrap();
    assert_eq!(r["status"], "gate_failure");
    assert_eq!(r["exit_code"], 2);
    assert_eq!(r["gates"]["hyperbolicity"]["verdict"], "not_hyperbolic");
    assert_eq!(r["failures"][0]["gate"], "topological_hyperbolicity");
    assert!(r["failures"][0]["condition"].as_str().unwrap().contains("postcritical"));
}

#[test]
fn dimension_of_hyperbolic_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run("dimension", EXP_02, dir.path(), &[]);
    assert_eq!(code, 0);
    let r = report.unwrap();
    let h = r["h"].as_f64().unwrap();
    assert!(h > 1.0 && h < 2.0, "h = {h}");
    assert_eq!(r["results"]["bounds_ok"], true);
    assert!(r["results"]["lyapunov"]["chi"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("out/curves/dimension.csv").exists());
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run("dimension", "{\"schema_version\": 1, \"map\": ", dir.path(), &[]);
    assert_eq!(code, 3);
    assert!(report.is_none());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_knobs_and_unknown_fields_are_config_errors() {
    let cases = [
        r#"{"schema_version": 1, "map": {"family": "exponential", "params": [[0.2, 0.0]]}, "grid": {"cell": 1}}"#,
        r#"{"schema_version": 1, "map": {"family": "cubic", "params": [[0.2, 0.0]]}}"#,
        r#"{"schema_version": 1, "map": {"family": "exponential", "params": [[0.0, 0.0]]}}"#,
        r#"{"schema_version": 9, "map": {"family": "exponential", "params": [[0.2, 0.0]]}}"#,
        r#"{"schema_version": 1, "map": {"family": "exponential", "params": [[0.2, 0.0]]}, "pressure": {"t_grid": [0.9, 1.5]}}"#,
    ];
    for (i, c) in cases.iter().enumerate() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = if i == 4 { "pressure" } else { "verify" };
        let (code, report) = run(pipeline, c, dir.path(), &[]);
        assert_eq!(code, 3, "case {i}");
        assert!(report.is_none(), "case {i}");
    }
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("verify", EXP_02, dir.path(), &["--threads", "0"]).0, 3);
    assert_eq!(hypdim(&["nonsense"]), 3);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, _) = run("pressure", EXP_02, a.path(), &["--seed", "11", "--threads", "1"]);
    let (cb, _) = run("pressure", EXP_02, b.path(), &["--seed", "11", "--threads", "3"]);
    assert_eq!((ca, cb), (0, 0));
    for f in ["report.json", "curves/pressure.csv", "curves/pressure_trace.csv"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn csv_values_carry_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run("pressure", EXP_02, dir.path(), &[]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("out/curves/pressure.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let mantissa = row[1].split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17, "{}", row[1]);
}

#[test]
fn nevanlinna_reproduces_the_closed_form_borel_sum() {
    let cfg = r#"{"schema_version": 1, "map": {"family": "exponential", "params": [[1.0, 0.0]]},
                  "nevanlinna": {"radius": 10000.0, "targets": [[2.718281828459045, 0.0]]}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run("nevanlinna", cfg, dir.path(), &[]);
    assert_eq!(code, 0);
    let b = &report.unwrap()["results"]["borel"][0];
    let exact = 0.5 / 0.5f64.tanh();
    let v = b["partial_sum"].as_f64().unwrap() + b["tail_estimate"].as_f64().unwrap();
    assert!((v - exact).abs() / exact < 1e-6);
}

#[test]
fn sweep_over_three_parameters() {
    let cfg = r#"{"schema_version": 1, "family": {"base": {"family": "exponential", "params": [[1.0, 0.0]]}, "degree": 1,
        "lambda_box": [{"lo": [0.0, 0.0], "hi": [0.0, 0.0]}, {"lo": [0.15, 0.0], "hi": [0.25, 0.0]}], "grid_density": 3}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run("sweep", cfg, dir.path(), &[]);
    assert_eq!(code, 0);
    let r = report.unwrap();
    assert_eq!(r["results"]["entries"].as_array().unwrap().len(), 3);
    assert!(r["results"]["max_neighbor_jump"].as_f64().unwrap() <= 0.15);
    let csv = std::fs::read_to_string(dir.path().join("out/curves/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn sweep_needs_a_family() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("sweep", EXP_02, dir.path(), &[]).0, 3);
}
