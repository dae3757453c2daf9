//! End-to-end smoke tests of the installed binary: subcommand wiring, exit
//! codes, and artifact determinism.

use std::path::Path;
use std::process::{Command, Output};

fn maebound(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maebound"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.conf");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const TINY_EXPERIMENT: &str = "\
data.source = synthetic
data.input_dim = 4
data.output_dim = 4
data.samples = 120
data.teacher_width = 8
data.noise_variance = 0.0
data.test_fraction = 0.25
roster.anchor1 = 6
roster.anchor2 = 12
roster.dnn1 = 6-12
train.learning_rate = 0.05
train.momentum = 0.2
train.epochs = 3
train.batch_size = 32
bounds.r = 6
experiment.seed = 11
model.hidden = 6-12
";

#[test]
fn calibrate_prints_constants_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = maebound(
        &[
            "calibrate",
            "--mae1", "0.9", "--mae2", "0.8",
            "--l1", "4", "--l2", "16",
            "--q", "1", "--d", "2", "--n", "10000", "--r", "1",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((v["c"].as_f64().unwrap() - 0.4).abs() < 1e-12, "{text}");
    assert!((v["b"].as_f64().unwrap() - 0.68).abs() < 1e-12, "{text}");
}

#[test]
fn calibrate_degenerate_anchors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = maebound(
        &[
            "calibrate",
            "--mae1", "0.9", "--mae2", "0.8",
            "--l1", "4", "--l2", "4",
            "--q", "1", "--d", "2", "--n", "100", "--r", "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = maebound(&["rademacher", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = maebound(&["experiment"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("--config"), "{err}");
}

#[test]
fn training_divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY_EXPERIMENT.replace("train.learning_rate = 0.05", "train.learning_rate = 1e280")
        + "train.top_mode = measure\ntrain.lambda_hidden = 1e200\n";
    let config = write_config(dir.path(), &text);
    let out = maebound(&["--config", &config, "--out", "out", "train"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn experiment_writes_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_EXPERIMENT);
    let out = maebound(
        &["--config", &config, "--out", "a", "experiment"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("model,test_mae,AE,EE,OE,MAE_B,b_clamped"));

    let out = maebound(
        &["--config", &config, "--out", "b", "experiment"],
        dir.path(),
    );
    assert!(out.status.success());
    let a = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    assert!(dir.path().join("a/curves/dnn1.svg").exists());
}

#[test]
fn train_then_emit_curves_via_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_EXPERIMENT);
    let out = maebound(&["--config", &config, "--out", "run", "train"], dir.path());
    assert!(out.status.success(), "{out:?}");
    let model = dir.path().join("run/model.maeb");
    assert!(model.exists());
    // The stored model reloads bit-exactly.
    let net = maebound::network::Network::load(&model).unwrap();
    assert_eq!(net.spec().hidden_widths, vec![6, 12]);

    let log_csv = dir.path().join("run/train_log.csv");
    std::fs::remove_file(dir.path().join("run/train_log.svg")).unwrap();
    let out = maebound(
        &["emit-curves", "--log", log_csv.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let svg = std::fs::read_to_string(dir.path().join("run/train_log.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn rademacher_suite_emits_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = maebound(
        &["--seed", "3", "--out", "r", "rademacher", "--draws", "500"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("check").is_some());
        assert!(v.get("holds").is_some());
    }
    let file = std::fs::read_to_string(dir.path().join("r/rademacher.jsonl")).unwrap();
    assert_eq!(file, text);

    let again = maebound(&["--seed", "3", "rademacher", "--draws", "500"], dir.path());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn synth_data_writes_idx_fixture_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out = maebound(
        &["--seed", "9", "--out", "d", "synth-data", "--images", "4", "--rows", "6", "--cols", "5"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let imgs = maebound::data::load_idx(&dir.path().join("d/images-idx3-ubyte")).unwrap();
    assert_eq!(imgs.images.len(), 4);
    assert_eq!((imgs.rows, imgs.cols), (6, 5));

    let config = write_config(dir.path(), TINY_EXPERIMENT);
    let out = maebound(&["--config", &config, "--out", "d", "synth-data"], dir.path());
    assert!(out.status.success(), "{out:?}");
    let train = maebound::data::load_dataset(&dir.path().join("d/train.maed")).unwrap();
    assert_eq!(train.len(), 90);
}
