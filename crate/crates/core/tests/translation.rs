//! Integration tests of the translation engine on a small toy corpus:
//! training contracts, determinism, the loss-history invariant, and the
//! round-trip improvement of a trained model over a fresh one.

use cyclesynth_core::data::Label;
use cyclesynth_core::data::{ingest_directory, DatasetManifest};
use cyclesynth_core::gan::train::{init_model, load_domain, run_steps, TrainOptions};
use cyclesynth_core::gan::{
    translate, AdversarialMode, Direction, DiscriminatorSpec, GanHyperparams, GeneratorSpec,
    OutputActivation,
};
use cyclesynth_core::toy::{generate_toy_corpus, toy_label_rule, ToySpec};
use cyclesynth_core::Real;
use ndarray::Array4;
use std::path::Path;
use tempfile::TempDir;

const SIZE: usize = 32;

fn toy_manifests(dir: &Path, n: usize) -> (DatasetManifest, DatasetManifest) {
    generate_toy_corpus(
        dir,
        &ToySpec {
            n_a: n,
            n_b: n,
            size: SIZE,
            seed: 7,
        },
    )
    .unwrap();
    let full = ingest_directory(dir, "toy", &toy_label_rule()).unwrap().manifest;
    (
        full.filter_by_label(Label::Negative).unwrap(),
        full.filter_by_label(Label::Positive).unwrap(),
    )
}

fn small_specs() -> (GeneratorSpec, DiscriminatorSpec) {
    (
        GeneratorSpec {
            input_channels: 1,
            base_width: 8,
            residual_blocks: 2,
            output_activation: OutputActivation::Tanh,
        },
        DiscriminatorSpec::new(1, 3, 8),
    )
}

fn hp(steps: usize, seed: u64) -> GanHyperparams {
    GanHyperparams {
        lambda_cycle: 10.0,
        learning_rate: 2e-4,
        batch_size: 1,
        total_steps: steps,
        adversarial_mode: AdversarialMode::LeastSquares,
        image_pool_size: 10,
        seed,
    }
}

fn opts() -> TrainOptions {
    TrainOptions {
        image_size: SIZE,
        checkpoint_every: None,
        checkpoint_dir: None,
        log_every: 0,
    }
}

#[test]
fn training_contracts_and_roundtrip_improvement() {
    let dir = TempDir::new().unwrap();
    let (a, b) = toy_manifests(dir.path(), 24);
    let images_a = load_domain(&a, dir.path(), SIZE).unwrap();
    let images_b = load_domain(&b, dir.path(), SIZE).unwrap();
    let (gen_spec, disc_spec) = small_specs();

    // Zero steps: initialized model, empty history.
    let fresh = init_model(&gen_spec, &disc_spec, &hp(0, 3)).unwrap();
    assert_eq!(fresh.step_count, 0);
    assert!(fresh.loss_history.is_empty());

    let mut trained = init_model(&gen_spec, &disc_spec, &hp(120, 3)).unwrap();
    run_steps(&mut trained, &images_a, &images_b, 120, &opts()).unwrap();
    assert_eq!(trained.step_count, 120);
    assert_eq!(trained.loss_history.len(), 120);

    // Every recorded bundle recomposes exactly from its parts.
    for bundle in &trained.loss_history {
        assert_eq!(bundle.total, bundle.recompute_total(10.0), "step {}", bundle.step);
        assert!(bundle.total.is_finite());
        assert!(bundle.cycle >= 0.0);
    }

    // Round trip: A -> B -> A on a trained model beats a fresh model.
    let roundtrip_err = |model: &mut cyclesynth_core::gan::TranslationModel<Real>| -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for img in images_a.iter().take(8) {
            let unit = img.mapv(|v| (v + 1.0) / 2.0);
            let there = translate(model, &unit, Direction::AToB).unwrap();
            let back = translate(model, &there, Direction::BToA).unwrap();
            for (x, y) in unit.iter().zip(back.iter()) {
                total += (x - y).abs() as f64;
                count += 1;
            }
        }
        total / count as f64
    };
    let mut fresh = fresh;
    let fresh_err = roundtrip_err(&mut fresh);
    let trained_err = roundtrip_err(&mut trained);
    assert!(
        trained_err < fresh_err,
        "trained round-trip {trained_err} not below fresh {fresh_err}"
    );
}

#[test]
fn same_seed_reproduces_loss_history_bitwise() {
    let dir = TempDir::new().unwrap();
    let (a, b) = toy_manifests(dir.path(), 10);
    let images_a = load_domain(&a, dir.path(), SIZE).unwrap();
    let images_b = load_domain(&b, dir.path(), SIZE).unwrap();
    let (gen_spec, disc_spec) = small_specs();

    let run = |seed: u64| {
        let mut model = init_model(&gen_spec, &disc_spec, &hp(12, seed)).unwrap();
        run_steps(&mut model, &images_a, &images_b, 12, &opts()).unwrap();
        model
            .loss_history
            .iter()
            .map(|bundle| (bundle.adv_a_to_b, bundle.adv_b_to_a, bundle.cycle, bundle.total))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn checkpoints_written_at_configured_interval() {
    let dir = TempDir::new().unwrap();
    let (a, b) = toy_manifests(dir.path(), 4);
    let images_a = load_domain(&a, dir.path(), SIZE).unwrap();
    let images_b = load_domain(&b, dir.path(), SIZE).unwrap();
    let (gen_spec, disc_spec) = small_specs();
    let ckpt_dir = TempDir::new().unwrap();
    let mut model = init_model(&gen_spec, &disc_spec, &hp(4, 2)).unwrap();
    run_steps(
        &mut model,
        &images_a,
        &images_b,
        4,
        &TrainOptions {
            image_size: SIZE,
            checkpoint_every: Some(2),
            checkpoint_dir: Some(ckpt_dir.path().to_path_buf()),
            log_every: 0,
        },
    )
    .unwrap();
    assert!(ckpt_dir.path().join("step_000002.ckpt").exists());
    assert!(ckpt_dir.path().join("step_000004.ckpt").exists());
    let loaded =
        cyclesynth_core::gan::checkpoint::load_model(&ckpt_dir.path().join("step_000004.ckpt"))
            .unwrap();
    assert_eq!(loaded.step_count, 4);
    assert_eq!(loaded.loss_history.len(), 4);
}

#[test]
fn unbalanced_domains_rejected() {
    let dir = TempDir::new().unwrap();
    generate_toy_corpus(
        dir.path(),
        &ToySpec {
            n_a: 8,
            n_b: 4,
            size: SIZE,
            seed: 1,
        },
    )
    .unwrap();
    let full = ingest_directory(dir.path(), "toy", &toy_label_rule()).unwrap().manifest;
    let a = full.filter_by_label(Label::Negative).unwrap();
    let b = full.filter_by_label(Label::Positive).unwrap();
    let (gen_spec, disc_spec) = small_specs();
    let err = cyclesynth_core::gan::train_translation(
        &a,
        dir.path(),
        &b,
        dir.path(),
        &gen_spec,
        &disc_spec,
        &hp(1, 0),
        &opts(),
    );
    assert!(err.is_err());
}

#[test]
fn translate_contracts() {
    let (gen_spec, disc_spec) = small_specs();
    let mut model = init_model(&gen_spec, &disc_spec, &hp(0, 9)).unwrap();

    let batch = Array4::from_shape_fn((3, 1, SIZE, SIZE), |(n, _, y, x)| {
        (((n * 3 + y + x) % 11) as Real) / 10.0
    });
    let out = translate(&mut model, &batch, Direction::AToB).unwrap();
    assert_eq!(out.dim(), batch.dim());
    assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));

    // Deterministic inference.
    let again = translate(&mut model, &batch, Direction::AToB).unwrap();
    assert_eq!(out, again);

    // Batch order preserved: row i of a permuted batch matches output i.
    let single: Vec<Array4<Real>> = (0..3)
        .map(|i| {
            batch
                .slice(ndarray::s![i..i + 1, .., .., ..])
                .to_owned()
        })
        .collect();
    for (i, img) in single.iter().enumerate() {
        let one = translate(&mut model, img, Direction::AToB).unwrap();
        for (a, b) in one.iter().zip(out.slice(ndarray::s![i..i + 1, .., .., ..]).iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    // Wrong channel count rejected.
    let bad = Array4::<Real>::zeros((1, 3, SIZE, SIZE));
    assert!(translate(&mut model, &bad, Direction::AToB).is_err());
}
