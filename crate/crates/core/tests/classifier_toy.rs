//! Classifier training on a separable toy task: planted bright-region
//! positives vs plain negatives.

use cyclesynth_core::classifier::train::train_classifier;
use cyclesynth_core::classifier::{Backbone, TrainingConfig};
use cyclesynth_core::data::{
    ingest_directory, patient_level_split, DatasetManifest, Label, SplitSpec, SplitUnit,
};
use cyclesynth_core::error::Error;
use cyclesynth_core::eval::evaluate;
use cyclesynth_core::toy::{generate_toy_corpus, toy_label_rule, ToySpec};
use std::path::Path;
use tempfile::TempDir;

const SIZE: usize = 32;

fn toy_manifest(dir: &Path, n_a: usize, n_b: usize) -> DatasetManifest {
    generate_toy_corpus(
        dir,
        &ToySpec {
            n_a,
            n_b,
            size: SIZE,
            seed: 21,
        },
    )
    .unwrap();
    ingest_directory(dir, "toy", &toy_label_rule()).unwrap().manifest
}

fn config(name: &str, seed: u64) -> TrainingConfig {
    TrainingConfig {
        name: name.into(),
        backbone: Backbone::Custom,
        learning_rate: 1.0,
        batch_size: 16,
        early_stop_patience: 10,
        early_stop_min_delta: 1e-4,
        max_epochs: 10,
        seed,
        ..TrainingConfig::default()
    }
}

#[test]
fn separable_toy_trains_to_high_sensitivity() {
    let dir = TempDir::new().unwrap();
    let full = toy_manifest(dir.path(), 100, 100);
    let (train, test) = patient_level_split(
        &full,
        &SplitSpec {
            train_fraction: 0.8,
            seed: 1,
            unit: SplitUnit::Patient,
        },
    )
    .unwrap();

    let mut model = train_classifier(&config("sep", 3), &train, dir.path(), SIZE, None).unwrap();
    // Loss strictly decreases over the first three epochs.
    assert!(model.curve.len() >= 3);
    assert!(model.curve[1] < model.curve[0]);
    assert!(model.curve[2] < model.curve[1]);

    let report = evaluate(&mut model, &test, dir.path(), SIZE, 0.5).unwrap();
    assert!(
        report.sensitivity >= 90.0,
        "sensitivity {:.1}% below 90%",
        report.sensitivity
    );
    // Counts partition the test set.
    assert_eq!(
        report.true_positives
            + report.false_positives
            + report.true_negatives
            + report.false_negatives,
        test.len()
    );
}

#[test]
fn patience_zero_stops_after_first_non_improving_epoch() {
    let dir = TempDir::new().unwrap();
    let full = toy_manifest(dir.path(), 12, 12);
    let mut cfg = config("impatient", 5);
    cfg.early_stop_patience = 0;
    // An absurd min_delta means no epoch ever counts as an improvement after
    // the first, so training stops right after epoch 2.
    cfg.early_stop_min_delta = 1e9;
    cfg.max_epochs = 10;
    let model = train_classifier(&cfg, &full, dir.path(), SIZE, None).unwrap();
    assert_eq!(model.stopped_epoch, 2);
}

#[test]
fn early_stop_fires_within_patience_of_best() {
    let dir = TempDir::new().unwrap();
    let full = toy_manifest(dir.path(), 30, 30);
    let mut cfg = config("stopper", 6);
    cfg.early_stop_patience = 2;
    cfg.max_epochs = 40;
    let model = train_classifier(&cfg, &full, dir.path(), SIZE, None).unwrap();
    if model.stopped_epoch < cfg.max_epochs {
        let best_epoch = model
            .curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i + 1)
            .unwrap();
        assert!(model.stopped_epoch <= best_epoch + cfg.early_stop_patience + 1);
    }
    // Finite at every epoch.
    assert!(model.curve.iter().all(|l| l.is_finite()));
}

#[test]
fn deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let full = toy_manifest(dir.path(), 16, 16);
    let run = |seed: u64| {
        let model = train_classifier(&config("det", seed), &full, dir.path(), SIZE, None).unwrap();
        (model.stopped_epoch, *model.curve.last().unwrap())
    };
    let (e1, l1) = run(11);
    let (e2, l2) = run(11);
    assert_eq!(e1, e2);
    assert!((l1 - l2).abs() < 1e-6, "losses differ: {l1} vs {l2}");
    let (_, l3) = run(12);
    assert_ne!(l1, l3);
}

#[test]
fn single_class_training_rejected() {
    let dir = TempDir::new().unwrap();
    let full = toy_manifest(dir.path(), 8, 8);
    let negatives_only = full.filter_by_label(Label::Negative).unwrap();
    assert!(matches!(
        train_classifier(&config("bad", 0), &negatives_only, dir.path(), SIZE, None),
        Err(Error::SingleClass)
    ));
}
