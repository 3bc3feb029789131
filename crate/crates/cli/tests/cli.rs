use std::process::{Command, Output};

use serde_json::Value;

fn cqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqkd")).args(args).output().expect("binary runs")
}

fn error_kind(out: &Output) -> String {
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    err["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn session_json_to_stdout() {
    let out = cqkd(&["session", "--seed", "3", "--duration", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["experiment"], "protocol-session");
    assert_eq!(v["seed"], 3);
}

#[test]
fn same_seed_same_bytes_regardless_of_threads() {
    let a = cqkd(&["security", "--seed", "9", "--duration", "10", "--threads", "1"]);
    let b = cqkd(&["security", "--seed", "9", "--duration", "10", "--threads", "4"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn missing_seed_is_rejected() {
    let out = cqkd(&["session"]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn bad_flag_values_report_json_errors() {
    let out = cqkd(&["session", "--seed", "1", "--attack", "ir:2"]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "usage");
    let out = cqkd(&["session", "--seed", "1", "--duration", "-1"]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "validation");
}

#[test]
fn config_file_with_flag_overrides_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "table1-repro", "seed": 5, "duration_s": 2, "table1": {"sessions": 4}}"#,
    )
    .unwrap();
    let out_path = dir.path().join("t1.csv");
    let out = cqkd(&[
        "table1",
        "--config",
        cfg.to_str().unwrap(),
        "--sessions",
        "3",
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stdout.is_empty());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("quantity,"));
    assert!(csv.lines().any(|l| l.starts_with("QBER,")));
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "fringe-scan", "seed": 5}"#).unwrap();
    let out = cqkd(&["session", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "colour": "blue"}"#).unwrap();
    let out = cqkd(&["session", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(error_kind(&out), "validation");
}

#[test]
fn scan_csv_has_fit_columns() {
    let out = cqkd(&[
        "scan", "--seed", "2", "--duration", "2", "--setting", "pi/2,pi/2", "--start-um", "-1", "--stop-um", "1",
        "--step-um", "0.05", "--format", "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "displacement_um,C_D0,C_D1,C_D2,fit_D0,fit_D1");
    assert_eq!(text.lines().count(), 42);
}

#[test]
fn stability_with_bins() {
    let out = cqkd(&["stability", "--seed", "2", "--duration", "10", "--bin-s", "2", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
}

#[test]
fn attacked_security_report_names_the_attack() {
    let out = cqkd(&["security", "--seed", "4", "--attack", "ir:1", "--normalization", "heralded"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["attack"]["kind"], "intercept_resend");
    assert_eq!(v["report"]["normalization"], "heralded");
}
