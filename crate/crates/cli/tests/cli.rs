//! Command-line behaviour: configuration precedence, outputs and exit codes.

use std::process::Command;

fn gmnse() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gmnse"));
    c.env_remove("GMNSE_NU");
    c
}

#[test]
fn simulate_writes_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.ndjson");
    let status = gmnse()
        .args(["simulate", "--galerkin-m", "4", "--noise-n", "2", "--T", "0.005", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 6);
    for key in ["t", "energy", "hLambda_sq", "h1_sq", "cutoff_value"] {
        assert!(rows[0].get(key).is_some(), "{key}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.ndjson.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["norm_convention"], "homogeneous-2pi");
    assert_eq!(manifest["config"]["sim"]["galerkin_m"], 4);
}

#[test]
fn flags_override_environment_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.conf");
    std::fs::write(&config, "nu = 0.25\ngalerkin_m = 4\nT = 0.002\n").unwrap();
    let out = dir.path().join("o.ndjson");
    let status = gmnse()
        .env("GMNSE_NU", "0.5")
        .args(["limit", "--nu", "0.75", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o.ndjson.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["sim"]["nu"], 0.75);
    assert_eq!(manifest["config"]["sim"]["T"], 0.002);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    for (text, needle) in [
        ("viscosity = 1\n", "unknown configuration key"),
        ("nu = lots\n", "type mismatch"),
        ("lambda = 1\ndelta = 0\n", "lambda = 1 requires delta"),
        ("noise_r = 1.6\n", "(0, 3/2)"),
    ] {
        std::fs::write(&config, text).unwrap();
        let out = gmnse().args(["simulate", "--config"]).arg(&config).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{text}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{text}: {err}");
    }
}

#[test]
fn failed_verdict_exits_with_two() {
    // a single-step audit cannot show the halving ratio
    let out = gmnse()
        .args(["energy-audit", "--galerkin-m", "4", "--T", "0.004", "--replicas", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.contains("\"record\":\"verdict\"")));
}

#[test]
fn snapshot_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("u.gmns");
    let run = |extra: &[&str], out: &std::path::Path| {
        gmnse()
            .args(["limit", "--galerkin-m", "4", "--T", "0.003", "--out"])
            .arg(out)
            .args(extra)
            .status()
            .unwrap()
    };
    assert!(run(&["--snapshot", snap.to_str().unwrap()], &dir.path().join("a.ndjson")).success());
    let config = dir.path().join("c.conf");
    std::fs::write(&config, format!("init_file = {}\n", snap.display())).unwrap();
    assert!(run(&["--config", config.to_str().unwrap()], &dir.path().join("b.ndjson")).success());
    let a = std::fs::read_to_string(dir.path().join("a.ndjson")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.ndjson")).unwrap();
    let last_a: serde_json::Value = serde_json::from_str(a.lines().last().unwrap()).unwrap();
    let first_b: serde_json::Value = serde_json::from_str(b.lines().next().unwrap()).unwrap();
    assert_eq!(last_a["energy"], first_b["energy"]);
}
