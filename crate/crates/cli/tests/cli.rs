use std::fs;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_inert-atlas");

const SMALL: &str = "
[model]
n = 2
g = 1.0

[grid]
dt = 1e-3
t_end = 5.0

[run]
replicas = 2
seed = 11
burn_in = 1.0
thin = 0.25
";

#[test]
fn simulate_writes_csv_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["simulate", "-c"])
        .arg(&cfg)
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("trajectory_r0.csv")).unwrap();
    assert!(csv.starts_with("t,v,x0,z1,z2,l1,l2\n"));
    assert!(out.join("trajectory_r1.csv").exists());
    assert!(out.join("report.json").exists());
}

#[test]
fn bad_config_is_a_usage_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("{SMALL}\n[run2]\nx = 1\n")).unwrap();
    let output = Command::new(BIN)
        .args(["lln", "-c"])
        .arg(&cfg)
        .arg("-o")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("run2"), "stderr: {stderr}");
}

#[test]
fn stationary_check_emits_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["stationary-check", "-c"])
        .arg(&cfg)
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("stationary_check.json")).unwrap();
    for field in [
        "identity_residual",
        "interior_residual",
        "boundary_residuals",
        "\"N\"",
        "\"g\"",
    ] {
        assert!(text.contains(field), "missing {field} in {text}");
    }
}

#[test]
fn skorokhod_test_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["skorokhod-test", "--trials", "10", "--steps", "50", "-c"])
        .arg(&cfg)
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("skorokhod_test.json").exists());
}

#[test]
fn seed_flag_overrides_config_and_reports_differ() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL.replace("t_end = 5.0", "t_end = 120.0")).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "11"), (&out_b, "12")] {
        let status = Command::new(BIN)
            .args(["lln", "--seed", seed, "-c"])
            .arg(&cfg)
            .arg("-o")
            .arg(out)
            .status()
            .unwrap();
        // threshold pass/fail is not the point here; only that it ran
        assert!(status.code().unwrap() < 2);
    }
    let a = fs::read_to_string(out_a.join("report.json")).unwrap();
    let b = fs::read_to_string(out_b.join("report.json")).unwrap();
    assert_ne!(a, b);
}
