//! Direct invocations of the binary: stage subcommands, flag handling, and
//! exit codes.

use std::path::Path;
use std::process::Command;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cyclesynth"))
}

fn gen_toy(dir: &Path, n_a: usize, n_b: usize) {
    let status = bin()
        .args(["gen-toy", "--n-a", &n_a.to_string(), "--n-b", &n_b.to_string()])
        .args(["--size", "32", "--seed", "3", "--out"])
        .arg(dir)
        .status()
        .unwrap();
    assert!(status.success());
}

fn ingest(corpus: &Path, out: &Path) {
    let status = bin()
        .args(["ingest", "--task", "toy"])
        .args(["--negative-dir", "domain_a", "--positive-dir", "domain_b"])
        .args(["--negative-domain", "toy-a", "--positive-domain", "toy-b"])
        .arg("--root")
        .arg(corpus)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn ingest_split_skew_flow() {
    let work = TempDir::new().unwrap();
    let corpus = work.path().join("corpus");
    gen_toy(&corpus, 20, 10);
    let manifest = work.path().join("full.jsonl");
    ingest(&corpus, &manifest);

    // split --fraction 0.8 --seed 42 produces two manifests.
    let train = work.path().join("train.jsonl");
    let test = work.path().join("test.jsonl");
    let status = bin()
        .args(["split", "--fraction", "0.8", "--seed", "42", "--unit", "patient"])
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out-train")
        .arg(&train)
        .arg("--out-test")
        .arg(&test)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(train.exists() && test.exists());

    let out = bin().arg("skew").arg("--manifest").arg(&manifest).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("skew 2.0000"), "{text}");
}

#[test]
fn merge_rejects_duplicate_ids_with_exit_1() {
    let work = TempDir::new().unwrap();
    let corpus = work.path().join("corpus");
    gen_toy(&corpus, 4, 4);
    let manifest = work.path().join("full.jsonl");
    ingest(&corpus, &manifest);
    let merged = work.path().join("merged.jsonl");
    let out = bin()
        .arg("merge")
        .arg("--manifests")
        .arg(&manifest)
        .arg(&manifest)
        .arg("--roots")
        .arg(&corpus)
        .arg(&corpus)
        .arg("--out")
        .arg(&merged)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate sample_id"));
}

#[test]
fn compare_over_metrics_files() {
    let work = TempDir::new().unwrap();
    let mut report_paths = Vec::new();
    let mut skew_paths = Vec::new();
    for (i, (name, sen)) in [("real", 20.0), ("real_g1", 54.0), ("real_g1_g2", 63.0), ("only_synthetic", 50.0)]
        .iter()
        .enumerate()
    {
        let report = serde_json::json!({
            "config_id": name,
            "true_positives": 5,
            "false_positives": 1,
            "true_negatives": 10,
            "false_negatives": 3,
            "sensitivity": sen,
            "confidences": [],
            "threshold": 0.5,
            "test_digest": "d0",
        });
        let rp = work.path().join(format!("metrics{i}.json"));
        std::fs::write(&rp, serde_json::to_string(&report).unwrap()).unwrap();
        report_paths.push(rp);
        let sp = work.path().join(format!("skew{i}.json"));
        std::fs::write(
            &sp,
            serde_json::to_string(&serde_json::json!({
                "negatives": 100, "positives": 50, "skew": 2.0
            }))
            .unwrap(),
        )
        .unwrap();
        skew_paths.push(sp);
    }
    let out_csv = work.path().join("comparison.csv");
    let mut cmd = bin();
    cmd.arg("compare").arg("--reports");
    for p in &report_paths {
        cmd.arg(p);
    }
    cmd.arg("--skews");
    for p in &skew_paths {
        cmd.arg(p);
    }
    cmd.arg("--out").arg(&out_csv);
    let out = cmd.output().unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&out_csv).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("real_g1_g2") && stdout.contains("<- best"));
}

#[test]
fn unknown_flag_is_usage_error_exit_1() {
    let out = bin().args(["skew", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_dataset_root_is_validation_error() {
    let work = TempDir::new().unwrap();
    // A config whose data_root does not exist must fail validation (exit 1)
    // before any compute.
    let config = serde_json::json!({
        "version": 1,
        "task_name": "toy",
        "data_root": work.path().join("missing"),
        "negative_dir": "domain_a",
        "positive_dir": "domain_b",
        "negative_domain": "toy_a",
        "positive_domain": "toy_b",
        "image_size": 32,
        "train_fraction": 0.8,
        "split_unit": "patient",
        "gan": {
            "generator": {"input_channels": 1, "base_width": 8, "residual_blocks": 2, "output_activation": "tanh"},
            "discriminator": {"input_channels": 1, "layers": 3, "base_width": 8, "receptive_field": 34},
            "hyperparams": {"lambda_cycle": 10.0, "learning_rate": 0.0002, "batch_size": 1, "total_steps": 1, "adversarial_mode": "least_squares", "image_pool_size": 0, "seed": 0}
        },
        "second_gan": null,
        "classifiers": [{"name": "real", "backbone": "custom", "include_real": true, "include_g1": false, "include_g2": false, "learning_rate": 1.0, "batch_size": 16, "early_stop_patience": 2, "early_stop_min_delta": 0.0001, "max_epochs": 2, "densenet_depth": 121, "seed": 0}],
        "threshold": 0.5,
        "embedding": {"n_neighbors": 5, "min_dist": 0.1, "n_epochs": 20, "source": "raw_pixels", "classifier": null, "max_points": 100},
        "output_root": work.path().join("out"),
        "seed": 0
    });
    let config_path = work.path().join("run.json");
    std::fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = bin().args(["run", "--config"]).arg(&config_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // Validation failed before any artifact was produced.
    assert!(!work.path().join("out").exists());
}
