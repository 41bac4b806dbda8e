use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_tamed-euler");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(BIN).args(args).arg("--output").arg(out).status().unwrap();
    status.code().unwrap()
}

fn particles_config(dir: &Path) -> PathBuf {
    let path = dir.join("particles.toml");
    fs::copy(configs().join("particles.toml"), &path).unwrap();
    path
}

#[test]
fn simulate_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = particles_config(dir.path());
    let out = dir.path().join("run");
    assert_eq!(run(&["simulate", "--config", config.to_str().unwrap()], &out), 0);
    let csv = fs::read_to_string(out.join("path_000.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,x1,x2,x3,x4,tamed");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1025);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
    assert!(rows[0].starts_with("0,"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = particles_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["simulate", "--config", config.to_str().unwrap(), "--set", "simulate.paths=3"];
    assert_eq!(run(&args, &a), 0);
    assert_eq!(run(&[&args[..], &["--workers", "2"]].concat(), &b), 0);
    for i in 0..3 {
        let name = format!("path_{i:03}.csv");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn converge_reports_a_rate() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("linear.toml");
    let out = dir.path().join("conv");
    let args = [
        "converge",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "plan.coarse_step_counts=[16, 32, 64]",
        "--set",
        "plan.fine_step_count=1024",
        "--set",
        "plan.path_count=500",
        "--set",
        "plan.bootstrap_resamples=20",
    ];
    assert_eq!(run(&args, &out), 0);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["fitted_rate"].as_f64().is_some(), "{summary}");
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn check_runs_the_requested_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let config = particles_config(dir.path());
    let out = dir.path().join("check");
    let args = [
        "check",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "problem.particle_count=3",
        "--set",
        "check.conditions=[\"LyapunovLipschitz\", \"Monotonicity\"]",
        "--set",
        "check.samples=2000",
    ];
    assert_eq!(run(&args, &out), 0);
    let reports: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("check_report.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = particles_config(dir.path());
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(run(&["simulate", "--config", config.to_str().unwrap()], &blocker.join("sub")), 3);
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = particles_config(dir.path());
    let out = dir.path().join("x");
    assert_eq!(run(&["simulate", "--config", config.to_str().unwrap(), "--set", "simulate.stepcount=5"], &out), 2);
    assert!(!out.exists());
}
