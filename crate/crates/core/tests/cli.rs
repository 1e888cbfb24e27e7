//! Command-line behaviour of the `gl-antenna` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gl-antenna")).args(args).output().unwrap()
}

fn write(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_config_prints_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), r#"{"preset": "paper-table1", "states": ["L2"]}"#);
    let out = bin(&["validate-config", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["states"], serde_json::json!(["L2"]));
    assert_eq!(v["sim"]["delta"], serde_json::json!(0.5e-3));
    assert_eq!(v["analysis"]["pattern_frequency"], serde_json::json!(5.5e9));

    // the echo is itself a valid config with the same content
    let again = write(dir.path(), std::str::from_utf8(&out.stdout).unwrap());
    let out2 = bin(&["validate-config", "--config", &again]);
    assert_eq!(out.stdout, out2.stdout);
}

#[test]
fn bad_field_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), r#"{"preset": "paper-table1", "antenna": {"dm": -1.0}}"#);
    let out = bin(&["validate-config", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("antenna.dm"), "{err}");
}

#[test]
fn missing_states_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "{}");
    let out = bin(&["validate-config", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("states"));
}

#[test]
fn unknown_state_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), r#"{"preset": "paper-table1"}"#);
    let out = bin(&["simulate", "--config", &cfg, "--states", "L9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("L9"));
}

#[test]
fn missing_file_is_an_error() {
    let out = bin(&["validate-config", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
}
