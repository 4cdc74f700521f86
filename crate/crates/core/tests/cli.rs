use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn homnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn homnet")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY_MODEL: &str = r#"{"model": {"k_mg": 8, "l_r": 8, "n_h": 2, "l_h": 16, "m": 2}}"#;

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&homnet(&["synth", "--bogus"])), 2);
    assert_eq!(code(&homnet(&["predict"])), 2);
}

#[test]
fn invalid_model_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": {"d": 64, "k_mg": 7}}"#).unwrap();
    let out = homnet(&["gradcheck", "--config", s(&cfg)]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_records_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.jsonl");
    std::fs::write(&data, "{\"record_id\": \"x\"}\n").unwrap();
    let out = homnet(&["eval", "--baseline-train", s(&data), "--data", s(&data)]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ckpt");
    let out = homnet(&["predict", "--ckpt", s(&missing), "--data", s(&missing)]);
    assert_eq!(code(&out), 5);
}

#[test]
fn failed_gradient_check_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": {"d": 16, "k_mg": 4, "l_r": 4, "n_h": 2, "l_h": 6}}"#).unwrap();
    let out = homnet(&["gradcheck", "--config", s(&cfg), "--tol", "1e-30"]);
    assert_eq!(code(&out), 4);
    assert_eq!(stdout_json(&out)["passed"], false);
}

#[test]
fn pipeline_writes_outputs_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let corpus = p.join("corpus");
    let cfg = p.join("cfg.json");
    std::fs::write(&cfg, TINY_MODEL).unwrap();

    let out = homnet(&[
        "synth", "--out", s(&corpus), "--bags", "60", "--subjects", "20", "--d", "64", "--m", "2", "--seed", "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    stdout_json(&out);
    assert!(corpus.join("train.jsonl").exists());
    assert!(corpus.join("manifest.json").exists());

    let train = corpus.join("train.jsonl");
    let val = corpus.join("val.jsonl");
    let ckpt = p.join("desk.ckpt");
    let out = homnet(&[
        "pretrain", "--config", s(&cfg), "--data", s(&train), "--val", s(&val), "--out", s(&ckpt),
        "--epochs", "1", "--batch-size", "16",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    stdout_json(&out);
    assert!(ckpt.exists());
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("desk.ckpt.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "pretrain");

    let site = p.join("site.ckpt");
    let out = homnet(&["finetune", "--ckpt", s(&ckpt), "--data", s(&train), "--out", s(&site), "--max-steps", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(site.exists());

    let out = homnet(&["eval", "--ckpt", s(&site), "--data", s(&val)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    let auc = report["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));

    let out = homnet(&["predict", "--ckpt", s(&site), "--data", s(&val)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    stdout_json(&out);
}
