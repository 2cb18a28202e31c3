use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn treegs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treegs"))
        .args(args)
        .env_remove("TREEGS_THREADS")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn arg(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn lambda1_writes_json_with_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eig.json");
    let o = treegs(&[
        "lambda1", "--kind", "rooted", "--branching", "2", "--edge-length", "1", "--depth", "12",
        "--nodes-per-edge", "16", "--bc", "dirichlet", "--tol", "1e-10", "--out", arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["config"]["command"], "lambda1");
    assert_eq!(v["config"]["depth"], 12);
    let l = v["result"]["lambda1"].as_f64().unwrap();
    assert!(l > 0.1154 && l < 0.17, "{l}");
    assert!(!std::fs::read(&out).unwrap().contains(&b'\r'));
}

#[test]
fn exponent_out_of_range_exits_with_configuration_error() {
    let o = treegs(&["minimize", "--p", "7", "--mu", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p must lie in (2,6)"));
}

#[test]
fn unknown_flags_and_bad_thread_counts_exit_with_one() {
    assert_eq!(treegs(&["lambda1", "--frobnicate"]).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_treegs"))
        .args(["lambda1", "--depth", "3"])
        .env("TREEGS_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("TREEGS_THREADS"));
}

#[test]
fn failing_verification_exits_with_three() {
    let ok = treegs(&["verify", "--suite", "poincare", "--samples", "50", "--seed", "1", "--lambda1", "0.1154891250"]);
    assert_eq!(ok.status.code(), Some(0));
    // Overstating λ₁ makes the remainder negative.
    let o = treegs(&["verify", "--suite", "poincare", "--samples", "50", "--seed", "1", "--lambda1", "5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL poincare_unrooted"));
}

#[test]
fn non_convergence_exits_with_two() {
    let o = treegs(&["minimize", "--depth", "4", "--p", "4", "--mu", "3", "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["converged"], false);
}

#[test]
fn sweep_csv_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    let csv = dir.path().join("curve.csv");
    let out = dir.path().join("curve.json");
    for threads in ["1", "1", "3"] {
        let o = Command::new(env!("CARGO_BIN_EXE_treegs"))
            .args(["sweep", "--depth", "5", "--nodes-per-edge", "4", "--mu-min", "0.5", "--mu-max", "4", "--points", "8"])
            .args(["--csv", arg(&csv), "--out", arg(&out)])
            .env("TREEGS_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((std::fs::read(&csv).unwrap(), json(&out)));
    }
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert!(text.starts_with("mu,energy,lambda,sup_norm,converged\n"));
    assert_eq!(text.lines().count(), 9);
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);
    // Only the recorded thread count differs.
    assert_eq!(outputs[0].0, outputs[2].0);
    assert_eq!(outputs[0].1["result"], outputs[2].1["result"]);
    assert_eq!(outputs[2].1["config"]["threads"], 3);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"p": 7.0}"#).unwrap();
    let o = treegs(&["minimize", "--p", "4", "--mu", "1", "--config", arg(&cfg)]);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(&cfg, r#"{"depth": 3, "nodes_per_edge": 4, "mu": 2.5}"#).unwrap();
    let out = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = treegs(&["radial", "--depth", "30", "--mu", "1", "--config", arg(&cfg), "--out", arg(&out), "--csv", arg(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["config"]["depth"], 3);
    assert_eq!(v["result"]["ground_state"]["mass"].as_f64(), Some(2.5));
    assert!(v["result"]["shooting"]["max_deviation"].as_f64().unwrap().is_finite());
    let profile = std::fs::read_to_string(&csv).unwrap();
    assert!(profile.starts_with("t,value\n"));
    assert_eq!(profile.lines().count(), 1 + 3 * 4 + 1);

    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(treegs(&["lambda1", "--config", arg(&cfg)]).status.code(), Some(1));
}

#[test]
fn compare_reports_both_kinds() {
    let o = treegs(&["compare", "--depth", "5", "--nodes-per-edge", "4", "--masses", "1,2,3", "--p", "4.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["rooted_unrooted"]["levels"].as_array().unwrap().len(), 3);
    assert!(v["result"]["radial_correspondence"]["worst_difference"].as_f64().unwrap() < 1e-8);
}
