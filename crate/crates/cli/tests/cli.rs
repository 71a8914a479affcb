// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn cpdkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpdkit"))
        .args(args)
        .env("CPDKIT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = cpdkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn no_partials(dir: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        assert!(
            !p.to_string_lossy().ends_with(".partial"),
            "{}",
            p.display()
        );
        if p.is_dir() {
            no_partials(&p);
        }
    }
}

#[test]
fn generate_writes_the_requested_balanced_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/missing/dir");
    ok(&[
        "generate",
        "--types",
        "4",
        "--per-type",
        "500",
        "--out",
        s(&out),
    ]);
    let text = std::fs::read_to_string(out.join("dataset.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 4000);
    let normal = text
        .lines()
        .filter(|l| !l.contains("\"change_type\""))
        .count();
    assert_eq!(normal, 2000);
    assert!(out.join("generate.config.toml").exists());
    no_partials(dir.path());
}

#[test]
fn generate_is_reproducible_and_guards_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "generate",
        "--per-type",
        "20",
        "--seed",
        "5",
        "--out",
        s(&a),
    ]);
    ok(&[
        "generate",
        "--per-type",
        "20",
        "--seed",
        "5",
        "--out",
        s(&b),
    ]);
    let read = |p: &Path| std::fs::read(p.join("dataset.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));

    let again = cpdkit(&[
        "generate",
        "--per-type",
        "20",
        "--seed",
        "6",
        "--out",
        s(&a),
    ]);
    assert!(!again.status.success());
    let stderr = String::from_utf8_lossy(&again.stderr);
    assert_eq!(stderr.trim().lines().count(), 1, "{stderr}");
    assert!(stderr.contains("--force"));
    assert_eq!(read(&a), read(&b));

    ok(&[
        "generate",
        "--per-type",
        "20",
        "--seed",
        "6",
        "--out",
        s(&a),
        "--force",
    ]);
    assert_ne!(read(&a), read(&b));
}

#[test]
fn invalid_loss_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpdkit(&["train", "--loss", "mse", "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mse"));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn train_evaluate_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    ok(&[
        "generate",
        "--types",
        "2",
        "--per-type",
        "15",
        "--out",
        s(&data),
    ]);
    let ds = data.join("dataset.jsonl");
    let models = root.join("models");
    for loss in ["cpd", "bce"] {
        ok(&[
            "train",
            "--data",
            s(&ds),
            "--loss",
            loss,
            "--epochs",
            "2",
            "--out",
            s(&models),
        ]);
    }
    let cpd = std::fs::read(models.join("model-cpd.bin")).unwrap();
    let bce = std::fs::read(models.join("model-bce.bin")).unwrap();
    // same header and parameter count; only the parameter values differ
    assert_eq!(cpd.len(), bce.len());
    assert_eq!(cpd[..41], bce[..41]);
    assert_ne!(cpd, bce);
    let log = std::fs::read_to_string(models.join("train-log-cpd.csv")).unwrap();
    assert!(log.starts_with("epoch,loss,delay_term,fa_term"));
    assert_eq!(log.lines().count(), 3);

    // rerun from the persisted config reproduces the model
    let rerun = root.join("rerun");
    ok(&[
        "train",
        "--config",
        s(&models.join("train-cpd.config.toml")),
        "--out",
        s(&rerun),
    ]);
    assert_eq!(std::fs::read(rerun.join("model-cpd.bin")).unwrap(), cpd);

    let eval = root.join("eval");
    ok(&[
        "evaluate",
        "--data",
        s(&ds),
        "--model",
        s(&models.join("model-cpd.bin")),
        "--model",
        &format!("bce={}", s(&models.join("model-bce.bin"))),
        "--thresholds",
        "0.1,0.5,0.9",
        "--out",
        s(&eval),
    ]);
    let csv = std::fs::read_to_string(eval.join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("model,threshold,time_to_fa,detection_delay,f1,covering,auc"));
    let labels: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["cpd", "cpd", "cpd", "bce", "bce", "bce"]);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["dataset"]["types"], 2);
    assert_eq!(
        report["models"][0]["curve"]["points"]
            .as_array()
            .unwrap()
            .len(),
        3
    );
    assert_eq!(report["models"][0]["traces"].as_array().unwrap().len(), 4);

    let plots = root.join("plots");
    ok(&[
        "plot",
        "--report",
        s(&eval.join("report.json")),
        "--out",
        s(&plots),
    ]);
    let curves = std::fs::read_to_string(plots.join("detection-curves.svg")).unwrap();
    assert_eq!(curves.matches("<polyline").count(), 2);
    assert_eq!(curves.matches("<circle").count(), 6);
    assert!(curves.contains(">cpd<") && curves.contains(">bce<"));
    assert!(plots.join("traces.svg").exists());
    assert!(!plots.join("metrics-vs-k.svg").exists());
    no_partials(root);
}

#[test]
fn evaluate_rejects_dimension_mismatch_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let models = root.join("models");
    ok(&[
        "train",
        "--per-type",
        "4",
        "--epochs",
        "1",
        "--loss",
        "bce",
        "--out",
        s(&models),
    ]);
    let ds = root.join("narrow.jsonl");
    let row: Vec<String> = (0..8).map(|i| format!("{}", i as f64 * 0.1)).collect();
    std::fs::write(
        &ds,
        format!(
            "{{\"id\":\"x\",\"dim\":2,\"length\":4,\"change_point\":4,\"features\":[{}]}}\n",
            row.join(",")
        ),
    )
    .unwrap();
    let eval = root.join("eval");
    let out = cpdkit(&[
        "evaluate",
        "--data",
        s(&ds),
        "--model",
        s(&models.join("model-bce.bin")),
        "--out",
        s(&eval),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
    assert!(std::fs::read_dir(&eval).unwrap().next().is_none());
}

#[test]
fn plot_summarises_several_type_counts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let run = root.join("grid");
    ok(&[
        "reproduce",
        "--grid",
        "1,2",
        "--per-type",
        "6",
        "--epochs",
        "1",
        "--out",
        s(&run),
    ]);
    let plots = root.join("plots");
    ok(&[
        "plot",
        "--report",
        s(&run.join("k1/report.json")),
        "--report",
        s(&run.join("k2/report.json")),
        "--out",
        s(&plots),
    ]);
    let svg = std::fs::read_to_string(plots.join("metrics-vs-k.svg")).unwrap();
    assert!(svg.contains("AUC vs K") && svg.contains("Covering vs K"));
    // one line per loss in each of the two panels
    assert_eq!(svg.matches("<polyline").count(), 4);
    let summary = std::fs::read_to_string(run.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    no_partials(root);
}
