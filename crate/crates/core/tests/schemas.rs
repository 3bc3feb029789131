use cqkd::experiment::{execute, ExperimentConfig, ExperimentKind};
use serde_json::Value;

fn schema(name: &str) -> jsonschema::Validator {
    let path = format!("{}/schema/{name}.schema.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn quick(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, 4.0, 17);
    cfg.apparatus.herald_rate_hz = 3000.0;
    cfg.table1.sessions = 3;
    cfg.scan.start_um = -2.0;
    cfg.scan.stop_um = 2.0;
    cfg.scan.step_um = 0.05;
    cfg.stability.bin_s = 1.0;
    cfg
}

#[test]
fn reports_match_their_schemas() {
    for (kind, name) in [
        (ExperimentKind::ProtocolSession, "session-report"),
        (ExperimentKind::FringeScan, "scan-report"),
        (ExperimentKind::Stability, "stability-report"),
        (ExperimentKind::SecurityReport, "security-report"),
        (ExperimentKind::Table1Repro, "table1-report"),
    ] {
        let doc: Value = serde_json::from_slice(&execute(&quick(kind)).unwrap().bytes).unwrap();
        assert_valid(&schema(name), &doc);
    }
}

#[test]
fn attacked_session_matches_schema() {
    let mut cfg = quick(ExperimentKind::SecurityReport);
    cfg.attack = "ir:0.5".parse().unwrap();
    let doc: Value = serde_json::from_slice(&execute(&cfg).unwrap().bytes).unwrap();
    assert_valid(&schema("security-report"), &doc);
}

#[test]
fn serialized_configs_match_config_schema() {
    let validator = schema("experiment-config");
    for kind in [ExperimentKind::ProtocolSession, ExperimentKind::Stability, ExperimentKind::FringeScan] {
        let mut cfg = quick(kind);
        cfg.attack = "ir:0.25".parse().unwrap();
        assert_valid(&validator, &serde_json::to_value(&cfg).unwrap());
    }
    let minimal: Value = serde_json::json!({"experiment": "stability", "duration_s": 60, "seed": 1});
    assert_valid(&validator, &minimal);
}

#[test]
fn config_schema_and_parser_reject_the_same_mistakes() {
    let validator = schema("experiment-config");
    for bad in [
        r#"{"experiment": "protocol-session", "duration_s": 20}"#,
        r#"{"experiment": "protocol-session", "duration_s": 0, "seed": 1}"#,
        r#"{"experiment": "session", "duration_s": 20, "seed": 1}"#,
        r#"{"experiment": "protocol-session", "duration_s": 20, "seed": 1, "extra": true}"#,
        r#"{"experiment": "protocol-session", "duration_s": 20, "seed": 1, "attack": {"kind": "intercept_resend", "p_attack": 1.5}}"#,
        r#"{"experiment": "protocol-session", "duration_s": 20, "seed": 1, "scan": {"step": 1}}"#,
    ] {
        let v: Value = serde_json::from_str(bad).unwrap();
        assert!(!validator.is_valid(&v), "schema accepted {bad}");
        assert!(ExperimentConfig::from_json(bad).is_err(), "parser accepted {bad}");
    }
}
