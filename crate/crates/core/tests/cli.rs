//! End-to-end tests of the `npe` binary: exit-code contract, artifact
//! layout and byte-for-byte determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn npe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_npe"))
}

struct Run {
    dir: tempfile::TempDir,
    code: i32,
    stderr: String,
}

impl Run {
    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }
}

/// Write the config into a fresh tempdir and run one subcommand with the
/// output directory set to `<dir>/out`.
fn run(subcommand: &str, config: &serde_json::Value, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("config.json");
    std::fs::write(&cfg_path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    let out = dir.path().join("out");
    let output = npe()
        .arg(subcommand)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run {
        dir,
        code: output.status.code().unwrap(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

fn desk() -> serde_json::Value {
    serde_json::json!({ "lattice": { "n": 32, "k": 8 } })
}

fn assert_report(run: &Run, expect_code: i32) {
    assert_eq!(run.code, expect_code, "stderr: {}", run.stderr);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(run.out("report.json")).unwrap()).unwrap();
    assert_eq!(report["exit_status"], expect_code);
}

fn csv_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn invalid_lattice_exits_2() {
    // n = 16 < 3k + 1 for k = 8: rejected before any work happens
    let r = run(
        "simulate",
        &serde_json::json!({ "lattice": { "n": 16, "k": 8 } }),
        &[],
    );
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(!r.out("report.json").exists());
}

#[test]
fn empty_sweep_exits_2() {
    let mut cfg = desk();
    cfg["sweep"] = serde_json::json!({ "axis": "cutoff_k", "values": [] });
    let r = run("sweep", &cfg, &[]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
}

#[test]
fn zero_amplitude_control_exits_3() {
    let mut cfg = desk();
    cfg["amplitudes"] = serde_json::json!([0.0, 0.0, 0.0]);
    let r = run("build-control", &cfg, &[]);
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
}

#[test]
fn negated_control_fails_certification_with_4() {
    let mut cfg = desk();
    cfg["negate_control"] = serde_json::json!(true);
    cfg["cert_points"] = serde_json::json!(40);
    let r = run("certify", &cfg, &[]);
    assert_report(&r, 4);
    // the certificate table is still emitted for inspection
    let lines = csv_lines(&r.out("certificate.csv"));
    assert_eq!(lines[0], "t,psi,ratio,threshold,margin");
    assert_eq!(lines.len(), 41);
}

#[test]
fn supercritical_datum_exits_5() {
    let mut cfg = desk();
    cfg["datum"] = serde_json::json!({ "kind": "control_multiple", "mu_times_g_inf": 2.0 });
    let r = run("simulate", &cfg, &[]);
    assert_report(&r, 5);
    let lines = csv_lines(&r.out("trajectory.csv"));
    // truncated before the grid end (121 points + header)
    assert!(lines.len() > 2 && lines.len() < 122);
}

#[test]
fn undersized_lambda_override_exits_7() {
    let mut cfg = desk();
    cfg["datum"] = serde_json::json!({ "kind": "control_multiple", "mu_times_g_inf": 2.0 });
    // far below the synthesized value and below the blow-up threshold
    cfg["lambda_override"] = serde_json::json!(1000.0);
    cfg["estimator_samples"] = serde_json::json!(4);
    cfg["cert_points"] = serde_json::json!(50);
    let r = run("stabilize", &cfg, &[]);
    assert_report(&r, 7);
    assert!(r.out("plan.json").exists());
    assert!(r.out("controlled.csv").exists());
}

#[test]
fn build_control_is_deterministic() {
    let mut cfg = desk();
    cfg["k_doubling"] = serde_json::json!(true);
    let a = run("build-control", &cfg, &[]);
    assert_report(&a, 0);
    let b = run("build-control", &cfg, &[]);
    assert_report(&b, 0);
    for name in ["u.field", "u_doubled.field", "convergence.csv"] {
        let x = std::fs::read(a.out(name)).unwrap();
        let y = std::fs::read(b.out(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn single_mode_simulation_succeeds() {
    let mut cfg = desk();
    cfg["datum"] =
        serde_json::json!({ "kind": "single_mode", "k": [1, 0, 0], "component": 1, "norm": 1.0 });
    cfg["time_grid"] = serde_json::json!({ "t_end": 2.0, "points": 41 });
    let r = run("simulate", &cfg, &[]);
    assert_report(&r, 0);
    let lines = csv_lines(&r.out("trajectory.csv"));
    assert_eq!(lines.len(), 42);
    // a single mode is a steady direction: pure heat decay of norm 1
    let last: Vec<&str> = lines[41].split(',').collect();
    let norm: f64 = last[1].parse().unwrap();
    assert!((norm - (-2.0_f64).exp()).abs() < 1e-9, "norm(2) = {norm}");
}

#[test]
fn oracle_comparison_runs() {
    let mut cfg = desk();
    cfg["datum"] = serde_json::json!({ "kind": "random_smooth", "seed": 7 });
    cfg["time_grid"] = serde_json::json!({ "t_end": 0.5, "points": 11 });
    cfg["oracle"] = serde_json::json!({ "dt": 1e-3, "t_end": 0.5 });
    let r = run("simulate", &cfg, &["--oracle"]);
    assert_report(&r, 0);
    let lines = csv_lines(&r.out("oracle.csv"));
    assert_eq!(lines[0], "t,oracle_norm0,formula_norm0,rel_deviation");
    for line in &lines[1..] {
        let dev: f64 = line.split(',').last().unwrap().parse().unwrap();
        assert!(dev < 1e-4, "oracle deviation {dev} in {line}");
    }
}

#[test]
fn field_files_roundtrip_through_configs() {
    let mut cfg = desk();
    let built = run("build-control", &cfg, &[]);
    assert_report(&built, 0);
    cfg["datum"] = serde_json::json!({
        "kind": "file",
        "path": built.out("u.field"),
    });
    cfg["time_grid"] = serde_json::json!({ "t_end": 1.0, "points": 11 });
    let r = run("simulate", &cfg, &[]);
    assert_report(&r, 0);
    let lines = csv_lines(&r.out("trajectory.csv"));
    let first: Vec<&str> = lines[1].split(',').collect();
    let norm: f64 = first[1].parse().unwrap();
    assert!(
        (norm - 1.0).abs() < 1e-10,
        "control should be unit norm, got {norm}"
    );
}

#[test]
fn classifier_sweep_spans_threshold() {
    let mut cfg = desk();
    cfg["sweep"] = serde_json::json!({
        "axis": "mu_times_g_inf",
        "values": [0.5, 2.0],
    });
    let r = run("sweep", &cfg, &[]);
    assert_report(&r, 0);
    let body = std::fs::read_to_string(r.out("sweep.csv")).unwrap();
    assert!(body.contains("Stability"), "missing Stability row: {body}");
    assert!(body.contains("Explosion"), "missing Explosion row: {body}");
}
