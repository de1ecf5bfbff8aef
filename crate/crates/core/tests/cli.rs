use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use setgrad::cli::{Summary, EXIT_INVALID_CONFIG, EXIT_SOLVER_FAILURE};
use setgrad::trace::read_csv;

fn setgrad(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_setgrad"));
    cmd.args(args).env_remove("SETGRAD_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    setgrad(args).output().expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("JSON output")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const VALLEY: [&str; 6] = ["--fn", "valley", "--alpha", "0.01", "--x0", "0.02,5"];

#[test]
fn summary_schema() {
    let out = run(&[&["run"][..], &VALLEY].concat());
    assert!(out.status.success());
    let v = json(&out.stdout);
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["final_f", "final_x", "iterations", "sign_alternations", "status"]);
    let s: Summary = serde_json::from_value(v).unwrap();
    assert_eq!(s.status, "stationary");
    assert_eq!(s.final_x.len(), 2);
    assert!(s.final_x.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.01);
}

#[test]
fn naive_baseline_zigzags() {
    let out = run(&[&["run"][..], &VALLEY, &["--mode", "naive", "--step", "0.05", "--iters", "50"]].concat());
    assert!(out.status.success());
    let s: Summary = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s.status, "iter_limit");
    assert_eq!(s.iterations, 50);
    assert!(s.sign_alternations >= 10);
}

#[test]
fn compare_reports_both_methods() {
    let out = run(&[&["compare"][..], &VALLEY, &["--format", "csv"]].concat());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
}

#[test]
fn min_norm_of_valley_hull() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "v.csv", "a0,a1\n1,0.01\n-1,0.01\n");
    let out = run(&["min-norm", "--points", &pts]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    let p: Vec<f64> = serde_json::from_value(v["point"].clone()).unwrap();
    assert!((p[0]).abs() <= 1e-12 && (p[1] - 0.01).abs() <= 1e-12, "{p:?}");
    assert!((v["norm_value"].as_f64().unwrap() - 0.01).abs() <= 1e-12);
}

#[test]
fn duality_check_closes_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "s.csv", "1,-1\n1,1\n");
    let out = run(&["duality-check", "--points", &pts, "--norm", "l1"]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert!(v["gap"].as_f64().unwrap() <= 1e-3, "{v}");
    assert_eq!(v["directions"], 10_000);
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"function":"valley","alpha":0.01,"x0":[0.02,5],"eps0":-1,"theta":2}"#,
    );
    let out = run(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(EXIT_INVALID_CONFIG as i32));
    let v = json(&out.stderr);
    assert_eq!(v["error"], "invalid_config");
    let fields: Vec<&str> = v["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["field"].as_str().unwrap())
        .collect();
    assert_eq!(fields, ["eps0", "theta"]);

    let cfg = write(dir.path(), "d.json", r#"{"function":"valley","bogus":1}"#);
    let out = run(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(EXIT_INVALID_CONFIG as i32));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"function":"valley","alpha":0.01,"x0":[0.02,5],"theta":2}"#);
    let out = run(&["run", "--config", &cfg, "--theta", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solver_failure_flushes_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let out = run(&["run", "--fn", "linear", "--params=-1e308", "--x0", "1", "--out", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_SOLVER_FAILURE as i32));
    assert_eq!(json(&out.stderr)["error"], "solver_failure");
    let partial = read_csv(&trace).unwrap();
    assert!(!partial.records.is_empty());
    assert!(partial.records.iter().all(|r| r.f.is_finite()));
}

#[test]
fn seed_env_overrides_seed_flag() {
    // One sample at the kink of max(x1, x2): which gradient is hit depends on the seed.
    let args = ["sample-grad", "--fn", "half_max", "--x0", "0,0", "--eps0", "0.5", "--samples", "1"];
    let hull = |seed: &str, env: Option<&str>| {
        let mut cmd = setgrad(&args);
        cmd.args(["--seed", seed]);
        if let Some(e) = env {
            cmd.env("SETGRAD_SEED", e);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_ne!(hull("1", None), hull("7", None));
    assert_eq!(hull("1", Some("7")), hull("7", None));

    let out = setgrad(&VALLEY).arg("run").env("SETGRAD_SEED", "x").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INVALID_CONFIG as i32));
}

#[test]
fn trace_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let summary = dir.path().join("s.json");
    let out = run(&[
        &["run"][..],
        &VALLEY,
        &["--out", trace.to_str().unwrap(), "--summary", summary.to_str().unwrap()],
    ]
    .concat());
    assert!(out.status.success());
    let traj = read_csv(&trace).unwrap();
    let text = fs::read_to_string(&trace).unwrap();
    assert_eq!(setgrad::trace::to_csv(&traj), text);
    let s: Summary = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(s.final_x, traj.final_x());
    assert_eq!(s.iterations, traj.iterations());
}

#[test]
fn sample_grad_writes_hull_csv() {
    let dir = tempfile::tempdir().unwrap();
    let hull = dir.path().join("h.csv");
    let out = run(&[
        "sample-grad", "--fn", "valley", "--alpha", "0.01", "--x0", "0.02,5", "--eps0", "0.5",
        "--exact", "--out", hull.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let h = setgrad::HullSet::from_csv(&fs::read_to_string(&hull).unwrap(), setgrad::Provenance::Exact).unwrap();
    assert_eq!(h.points().len(), 2);
}
