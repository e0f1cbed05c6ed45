//! End-to-end checks of the command-line interface: exit codes, artifact
//! layout, and the committed golden partition fixture.

use std::path::Path;
use std::process::{Command, Output};

fn fedtopo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedtopo")).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

#[test]
fn ph_command_emits_diagram_csv() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("ring.csv");
    std::fs::write(&field, "0,0,0\n0,1,0\n0,0,0\n").unwrap();
    let out = fedtopo(&["ph", "--input", field.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("dim,birth,death\n"));
    assert!(text.contains("1,0,1\n"), "loop row missing: {text}");
    assert!(text.contains("0,0,inf\n"), "essential row missing: {text}");

    // Constant field: the essential class only.
    let constant = dir.path().join("flat.csv");
    std::fs::write(&constant, "2,2\n2,2\n").unwrap();
    let out = fedtopo(&["ph", "--input", constant.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "dim,birth,death\n0,2,inf\n");
}

#[test]
fn ph_command_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let out = fedtopo(&["ph", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "diagnostic must carry the line: {err}");
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"version\": 9}").unwrap();
    let out = fedtopo(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown keys are config errors too.
    std::fs::write(
        &cfg,
        r#"{"version":1,"seed":1,"dataset":{"kind":"synthetic","spec":{},"test_per_class":5},"typo_key":1}"#,
    )
    .unwrap();
    let out = fedtopo(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn partition_golden_fixture_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedtopo(&[
        "partition",
        "--config",
        &fixture("partition_config.json"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let produced = std::fs::read_to_string(dir.path().join("partition.json")).unwrap();
    let golden = std::fs::read_to_string(fixture("golden_partition.json")).unwrap();
    assert_eq!(produced, golden, "partition drifted from the committed fixture");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("partition_config.json");
    let base = dir.path().join("a");
    let overridden = dir.path().join("b");
    let out = fedtopo(&["partition", "--config", &config, "--out", base.to_str().unwrap()]);
    assert!(out.status.success());
    let out = fedtopo(&[
        "partition",
        "--config",
        &config,
        "--out",
        overridden.to_str().unwrap(),
        "--seed",
        "777",
    ]);
    assert!(out.status.success());
    let a = std::fs::read_to_string(base.join("partition.json")).unwrap();
    let b = std::fs::read_to_string(overridden.join("partition.json")).unwrap();
    assert_ne!(a, b, "seed override must change the partition");
}

#[test]
fn screen_command_emits_scores_and_winner() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("screen.json");
    let config = |blocks: &str| {
        format!(
            r#"{{
                "version": 1,
                "seed": 3,
                "dataset": {{
                    "kind": "synthetic",
                    "spec": {{ "count_per_class": 14, "seed": 0 }},
                    "test_per_class": 4
                }},
                "screen": {{
                    "model": "simple_cnn", "blocks": {blocks},
                    "n_pairs": 16, "pca_k": 4, "sample_count": 24
                }}
            }}"#
        )
    };

    // Two candidate blocks: one CSV row per block and metric plus a winner.
    std::fs::write(&cfg_path, config(r#"["conv1", "conv2"]"#)).unwrap();
    let out_dir = dir.path().join("two");
    let out = fedtopo(&[
        "screen",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("screen.csv")).unwrap();
    assert!(csv.starts_with("block,metric,auc\n"));
    for needle in ["conv1,bottleneck,", "conv2,pi_cosine,", "winner,"] {
        assert!(csv.contains(needle), "missing {needle} in:\n{csv}");
    }

    // A single configured block wins trivially.
    std::fs::write(&cfg_path, config(r#"["conv2"]"#)).unwrap();
    let out_dir = dir.path().join("one");
    let out = fedtopo(&[
        "screen",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("screen.csv")).unwrap();
    assert!(csv.contains("winner,conv2,"));

    // An empty block list is a configuration error.
    std::fs::write(&cfg_path, config("[]")).unwrap();
    let out = fedtopo(&[
        "screen",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        dir.path().join("none").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.json");
    std::fs::write(
        &cfg,
        r#"{
            "version": 1,
            "seed": 5,
            "dataset": {
                "kind": "synthetic",
                "spec": { "count_per_class": 12, "seed": 0 },
                "test_per_class": 6
            },
            "partition": { "clients": 2, "scheme": { "kind": "q_skew", "alpha": 1.0 } },
            "federation": {
                "clients": 2, "rounds": 1, "local_epochs": 1, "batch_size": 8,
                "method": "fedavg"
            }
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = fedtopo(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["round_client.csv", "round_global.csv", "report.json", "model.ftck"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let report = fedtopo(&["report", "--out", out_dir.to_str().unwrap()]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("final accuracy"));
    assert!(text.contains("round"));
}
