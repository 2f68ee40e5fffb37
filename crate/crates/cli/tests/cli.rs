use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn era_gbdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_era-gbdt"))
        .args(args)
        .env("ERA_GBDT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = era_gbdt(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

fn small_memorization(dir: &Path, seed: &str) {
    ok(&[
        "gen-data",
        "memorization",
        "--out-dir",
        p(dir),
        "--seed",
        seed,
        "--n-train",
        "256",
        "--n-test",
        "100",
        "--n-eras",
        "4",
        "--dims",
        "6",
    ]);
}

#[test]
fn gen_data_sizes_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    small_memorization(&a, "3");
    small_memorization(&b, "3");
    assert_eq!(line_count(&a.join("train.csv")), 257);
    assert_eq!(line_count(&a.join("test.csv")), 101);
    for f in ["train.csv", "test.csv", "spec.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let spec: Value = serde_json::from_str(&std::fs::read_to_string(a.join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["experiment"], "memorization");
    assert_eq!(spec["spec"]["dims"], 6);

    let s = tmp.path().join("sine");
    ok(&["gen-data", "sine", "--out-dir", p(&s), "--n-eras", "5", "--rows-per-era", "10", "--test-shift", "-1.5"]);
    assert_eq!(line_count(&s.join("train.csv")), 51);
    assert_eq!(line_count(&s.join("test.csv")), 11);
}

#[test]
fn train_predict_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_memorization(&data, "1");
    let model = tmp.path().join("model.json");
    let record = tmp.path().join("record.json");
    ok(&[
        "train",
        "--train",
        p(&data.join("train.csv")),
        "--test",
        p(&data.join("test.csv")),
        "--model-out",
        p(&model),
        "--record-out",
        p(&record),
        "--split-type",
        "directional-era",
        "--boltzmann-alpha",
        "-1",
        "--n-boosting-rounds",
        "5",
    ]);
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(&record).unwrap()).unwrap();
    assert_eq!(rec["split_type"], "directional_era_split");
    assert!(rec["train_metrics"]["accuracy"].is_number());
    assert!(rec["test_metrics"]["accuracy"].is_number());
    assert!(rec["error"].is_null());

    let preds = tmp.path().join("preds.csv");
    ok(&["predict", "--model", p(&model), "--data", p(&data.join("test.csv")), "--out", p(&preds)]);
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prediction"));
    let values: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 100);

    let out = ok(&["evaluate", "--model", p(&model), "--data", p(&data.join("test.csv"))]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_rows"], 100);
    assert_eq!(report["accuracy"], rec["test_metrics"]["accuracy"]);
    let mse = values
        .iter()
        .zip(load_targets(&data.join("test.csv")))
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / 100.0;
    assert!((report["mse"].as_f64().unwrap() - mse).abs() < 1e-12);
}

fn load_targets(path: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "target").unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn invalid_config_exits_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_memorization(&data, "2");
    let out = era_gbdt(&[
        "train",
        "--train",
        p(&data.join("train.csv")),
        "--model-out",
        p(&tmp.path().join("m.json")),
        "--learning-rate",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));

    assert_eq!(era_gbdt(&["train", "--bogus"]).status.code(), Some(1));
}

#[test]
fn missing_input_exits_with_data_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = era_gbdt(&[
        "train",
        "--train",
        p(&tmp.path().join("nope.csv")),
        "--model-out",
        p(&tmp.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn grid_search_writes_one_row_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_memorization(&data, "4");
    let csv = tmp.path().join("runs.csv");
    let out = ok(&[
        "grid-search",
        "--train",
        p(&data.join("train.csv")),
        "--test",
        p(&data.join("test.csv")),
        "--n-configs",
        "2",
        "--seed",
        "9",
        "--out",
        p(&csv),
    ]);
    assert_eq!(line_count(&csv), 7);
    let stdout = String::from_utf8_lossy(&out.stdout);
    for st in ["original", "era", "directional-era"] {
        assert!(stdout.lines().any(|l| l.starts_with(st)), "{stdout}");
    }
    assert!(stdout.contains("best test accuracy"));
}

#[test]
fn degenerate_demo_text_and_json() {
    let text = ok(&["demo-degenerate"]);
    let text = String::from_utf8_lossy(&text.stdout);
    assert!(text.contains("feature1 <= 2.5"));
    assert!(!text.contains("FAIL"));

    let json = ok(&["demo-degenerate", "--json"]);
    let report: Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["choices"].as_array().unwrap().len(), 3);
}
