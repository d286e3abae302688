//! Acceptance suite. One test per criterion, named c01..c10; the per-test
//! ok/FAILED line from the harness is the pass/fail line for that criterion,
//! and each test also prints a `[criterion N] PASS` summary (visible with
//! `--nocapture`).
//!
//! Criteria at a glance:
//!   c01 loss value oracles (1e-6)         c06 end-to-end protocol smoke
//!   c02 gradient checks (rel 1e-4)        c07 split property suite (1000x)
//!   c03 skew reproduction                 c08 determinism suite
//!   c04 sensitivity reproduction          c09 softmax / confidence
//!   c05 toy translation convergence       c10 desk-scale limitation note

use cyclesynth_core::classifier::train::{train_classifier, TrainedClassifier};
use cyclesynth_core::classifier::{Backbone, TrainingConfig};
use cyclesynth_core::data::{
    compute_skew, ingest_directory, patient_level_split, undersample_majority, DatasetManifest,
    Label, ManifestRecord, Provenance, SourceDomain, SplitSpec, SplitUnit,
};
use cyclesynth_core::embed::umap::{compute_embedding, UmapParams};
use cyclesynth_core::eval::{confidence_scores, evaluate, sensitivity};
use cyclesynth_core::gan::train::{init_model, load_domain, run_steps, TrainOptions};
use cyclesynth_core::gan::{
    adversarial_loss, adversarial_loss_from_scores, cycle_loss, disc_loss_and_grads,
    gen_adv_loss_and_grad, l1_grad, total_loss, AdversarialMode, Direction, DiscriminatorSpec,
    GanHyperparams, GeneratorSpec, OutputActivation,
};
use cyclesynth_core::nn::fdcheck::{max_relative_error, numeric_param_grads};
use cyclesynth_core::nn::init::NormalSource;
use cyclesynth_core::nn::loss::softmax;
use cyclesynth_core::nn::{
    export_grads, zero_grads, Conv2d, Layer, ParamVisitor, Sequential, Tanh,
};
use cyclesynth_core::toy::{generate_toy_corpus, toy_label_rule, ToySpec};
use cyclesynth_core::Real;
use ndarray::{Array4, Axis};
use std::path::Path;
use tempfile::TempDir;

// ---------------------------------------------------------------------
// criterion 1: loss oracles
// ---------------------------------------------------------------------

#[test]
fn c01_loss_oracles() {
    const TOL: f64 = 1e-6;

    // Analytic constant-half case, driven through the real operation with a
    // zero-parameter discriminator (sigmoid of zero scores 0.5 everywhere).
    let mut stub = cyclesynth_core::gan::build_discriminator::<f64>(
        &DiscriminatorSpec::new(1, 2, 4),
        1,
    )
    .unwrap();
    stub.zero_parameters();
    let real = Array4::from_shape_fn((2, 1, 16, 16), |(n, _, y, x)| {
        ((n + y * 3 + x) % 7) as f64 / 7.0 * 2.0 - 1.0
    });
    let fake = real.mapv(|v| -v);
    let value = adversarial_loss(&mut stub, &real, &fake, AdversarialMode::Log).unwrap();
    assert!(
        (value - 2.0 * 0.5f64.ln()).abs() < TOL,
        "constant-half stub: {value}"
    );

    // Hand grids: the oracle is an independent scalar computation of both
    // grid means, frozen below.
    let grid = |vals: &[f64; 4]| Array4::from_shape_vec((1, 1, 2, 2), vals.to_vec()).unwrap();
    let real_vals = [0.8f64, 0.6, 0.7, 0.9];
    let fake_vals = [0.2f64, 0.3, 0.1, 0.4];
    let oracle = real_vals.iter().map(|v: &f64| v.ln()).sum::<f64>() / 4.0
        + fake_vals.iter().map(|v: &f64| (1.0 - v).ln()).sum::<f64>() / 4.0;
    let value = adversarial_loss_from_scores(
        &grid(&real_vals),
        &grid(&fake_vals),
        AdversarialMode::Log,
    )
    .unwrap();
    assert!((value - oracle).abs() < TOL);
    assert!((value - (-0.5980023173383796)).abs() < TOL, "{value}");

    // Perfect discriminator: maximum, approximately zero.
    let value = adversarial_loss_from_scores(
        &Array4::from_elem((1, 1, 2, 2), 1.0),
        &Array4::from_elem((1, 1, 2, 2), 0.0),
        AdversarialMode::Log,
    )
    .unwrap();
    assert!(value.abs() < 1e-5 && value <= 0.0);

    // Cycle-loss hand cases.
    let zeros = Array4::<f64>::zeros((1, 1, 2, 2));
    let halves = Array4::from_elem((1, 1, 2, 2), 0.5);
    let quarter = Array4::from_elem((1, 1, 2, 2), 0.25);
    let v = cycle_loss(&zeros, &halves, &quarter, &quarter.clone()).unwrap();
    assert!((v - 0.5).abs() < TOL);
    let v = cycle_loss(&quarter, &quarter.clone(), &quarter, &quarter.clone()).unwrap();
    assert!(v.abs() < TOL);

    // Weighted recomposition with lambda = 10 is exact.
    let adv = 2.0 * 0.5f64.ln();
    let bundle = total_loss(0, adv, adv, 0.5, 10.0);
    assert_eq!(bundle.total, adv + adv + 10.0 * 0.5);
    assert_eq!(bundle.total, bundle.recompute_total(10.0));

    println!("[criterion 1] PASS - loss oracles match independent computation to 1e-6");
}

// ---------------------------------------------------------------------
// criterion 2: gradient checks on micro networks
// ---------------------------------------------------------------------

/// 1x1 conv (weight + bias = two parameters) followed by tanh.
fn micro_generator(seed: u64) -> Sequential<f64> {
    let mut rng = NormalSource::new(seed);
    let mut g = Sequential::new();
    g.push("conv", Conv2d::new(1, 1, 1, 1, 0, true, 0.5, &mut rng));
    g.push("tanh", Tanh::new());
    g
}

fn micro_batch(seed: u64, scale: f64) -> Array4<f64> {
    let mut rng = NormalSource::new(seed);
    Array4::from_shape_fn((2, 1, 2, 2), |_| rng.sample() * scale)
}

struct Pair<'a> {
    first: &'a mut Sequential<f64>,
    second: &'a mut Sequential<f64>,
}

impl<'a> Layer<f64> for Pair<'a> {
    fn forward(&mut self, _x: &Array4<f64>, _t: bool) -> Array4<f64> {
        unreachable!()
    }
    fn backward(&mut self, _g: &Array4<f64>) -> Array4<f64> {
        unreachable!()
    }
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, f64>) {
        self.first.visit_params(&format!("{prefix}first."), f);
        self.second.visit_params(&format!("{prefix}second."), f);
    }
}

#[test]
fn c02_gradient_checks() {
    const TOL: f64 = 1e-4;
    let a = micro_batch(10, 0.8);
    let b = micro_batch(11, 0.8);

    // (1) Cycle term w.r.t. both micro generators.
    {
        let mut g_ab = micro_generator(1);
        let mut g_ba = micro_generator(2);
        let analytic = {
            zero_grads(&mut g_ab);
            zero_grads(&mut g_ba);
            // Path A: a -> fake_b -> rec_a.
            let fake_b = g_ab.forward(&a, true);
            let rec_a = g_ba.forward(&fake_b, true);
            let grad_fake_b = g_ba.backward(&l1_grad(&rec_a, &a));
            g_ab.backward(&grad_fake_b);
            // Path B: b -> fake_a -> rec_b.
            let fake_a = g_ba.forward(&b, true);
            let rec_b = g_ab.forward(&fake_a, true);
            let grad_fake_a = g_ab.backward(&l1_grad(&rec_b, &b));
            g_ba.backward(&grad_fake_a);
            let mut pair = Pair {
                first: &mut g_ab,
                second: &mut g_ba,
            };
            export_grads(&mut pair)
        };
        let numeric = {
            let mut pair = Pair {
                first: &mut g_ab,
                second: &mut g_ba,
            };
            numeric_param_grads(
                &mut pair,
                &mut |pair| {
                    let fake_b = pair.first.forward(&a, true);
                    let rec_a = pair.second.forward(&fake_b, true);
                    let fake_a = pair.second.forward(&b, true);
                    let rec_b = pair.first.forward(&fake_a, true);
                    cycle_loss(&a, &rec_a, &b, &rec_b).unwrap()
                },
                1e-6,
            )
        };
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < TOL, "cycle term gradient error {err}");
    }

    // (2) Generator adversarial term (non-saturating log form) through a
    // small discriminator.
    let disc_spec = DiscriminatorSpec::new(1, 2, 4);
    {
        let mut g = micro_generator(3);
        let mut d = cyclesynth_core::gan::build_discriminator::<f64>(&disc_spec, 7).unwrap();
        let a8 = {
            let mut rng = NormalSource::new(12);
            Array4::from_shape_fn((1, 1, 8, 8), |_| rng.sample() * 0.6)
        };
        let analytic = {
            zero_grads(&mut g);
            let fake = g.forward(&a8, true);
            let scores = d.forward(&fake, true);
            let (_, grad_scores) = gen_adv_loss_and_grad(&scores, AdversarialMode::Log);
            let grad_fake = d.backward(&grad_scores);
            g.backward(&grad_fake);
            export_grads(&mut g)
        };
        let numeric = numeric_param_grads(
            &mut g,
            &mut |g| {
                let fake = g.forward(&a8, true);
                let scores = d.forward(&fake, false);
                let (loss, _) = gen_adv_loss_and_grad(&scores, AdversarialMode::Log);
                loss
            },
            1e-6,
        );
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < TOL, "generator adversarial gradient error {err}");
    }

    // (3) Discriminator log objective w.r.t. a micro discriminator
    // (1x1 conv + sigmoid: two parameters).
    {
        let mut rng = NormalSource::new(4);
        let mut d = Sequential::<f64>::new();
        d.push("conv", Conv2d::new(1, 1, 1, 1, 0, true, 0.5, &mut rng));
        d.push("sig", cyclesynth_core::nn::Sigmoid::new());
        let real = micro_batch(13, 0.7);
        let fake = micro_batch(14, 0.7);
        let analytic = {
            zero_grads(&mut d);
            let joined = ndarray::concatenate(Axis(0), &[real.view(), fake.view()]).unwrap();
            let scores = d.forward(&joined, true);
            let sr = scores.slice(ndarray::s![0..2, .., .., ..]).to_owned();
            let sf = scores.slice(ndarray::s![2.., .., .., ..]).to_owned();
            let (_, gr, gf) = disc_loss_and_grads(&sr, &sf, AdversarialMode::Log);
            let grad = ndarray::concatenate(Axis(0), &[gr.view(), gf.view()]).unwrap();
            d.backward(&grad);
            export_grads(&mut d)
        };
        let numeric = numeric_param_grads(
            &mut d,
            &mut |d| {
                let sr = d.forward(&real, true);
                let sf = d.forward(&fake, true);
                let (loss, _, _) = disc_loss_and_grads(&sr, &sf, AdversarialMode::Log);
                loss
            },
            1e-6,
        );
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < TOL, "discriminator objective gradient error {err}");
    }

    // (4) Weighted total (both generator adversarial terms + lambda x cycle),
    // the objective the generator update actually minimizes.
    {
        let lambda = 10.0;
        let mut g_ab = micro_generator(5);
        let mut g_ba = micro_generator(6);
        let mut d_a = cyclesynth_core::gan::build_discriminator::<f64>(&disc_spec, 8).unwrap();
        let mut d_b = cyclesynth_core::gan::build_discriminator::<f64>(&disc_spec, 9).unwrap();
        let a8 = {
            let mut rng = NormalSource::new(15);
            Array4::from_shape_fn((1, 1, 8, 8), |_| rng.sample() * 0.6)
        };
        let b8 = {
            let mut rng = NormalSource::new(16);
            Array4::from_shape_fn((1, 1, 8, 8), |_| rng.sample() * 0.6)
        };
        let analytic = {
            zero_grads(&mut g_ab);
            zero_grads(&mut g_ba);
            let fake_b = g_ab.forward(&a8, true);
            let rec_a = g_ba.forward(&fake_b, true);
            let grad_rec_a = l1_grad(&rec_a, &a8).mapv(|v| v * lambda);
            let grad_fb_cycle = g_ba.backward(&grad_rec_a);
            let scores_fb = d_b.forward(&fake_b, true);
            let (_, gs) = gen_adv_loss_and_grad(&scores_fb, AdversarialMode::Log);
            let grad_fb_adv = d_b.backward(&gs);
            g_ab.backward(&(&grad_fb_cycle + &grad_fb_adv));

            let fake_a = g_ba.forward(&b8, true);
            let rec_b = g_ab.forward(&fake_a, true);
            let grad_rec_b = l1_grad(&rec_b, &b8).mapv(|v| v * lambda);
            let grad_fa_cycle = g_ab.backward(&grad_rec_b);
            let scores_fa = d_a.forward(&fake_a, true);
            let (_, gs) = gen_adv_loss_and_grad(&scores_fa, AdversarialMode::Log);
            let grad_fa_adv = d_a.backward(&gs);
            g_ba.backward(&(&grad_fa_cycle + &grad_fa_adv));

            let mut pair = Pair {
                first: &mut g_ab,
                second: &mut g_ba,
            };
            export_grads(&mut pair)
        };
        let numeric = {
            let mut pair = Pair {
                first: &mut g_ab,
                second: &mut g_ba,
            };
            numeric_param_grads(
                &mut pair,
                &mut |pair| {
                    let fake_b = pair.first.forward(&a8, true);
                    let rec_a = pair.second.forward(&fake_b, true);
                    let fake_a = pair.second.forward(&b8, true);
                    let rec_b = pair.first.forward(&fake_a, true);
                    let cyc = cycle_loss(&a8, &rec_a, &b8, &rec_b).unwrap();
                    let (adv_b, _) =
                        gen_adv_loss_and_grad(&d_b.forward(&fake_b, false), AdversarialMode::Log);
                    let (adv_a, _) =
                        gen_adv_loss_and_grad(&d_a.forward(&fake_a, false), AdversarialMode::Log);
                    adv_b + adv_a + lambda * cyc
                },
                1e-6,
            )
        };
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < TOL, "weighted total gradient error {err}");
    }

    println!("[criterion 2] PASS - analytic gradients match central differences within 1e-4");
}

// ---------------------------------------------------------------------
// criterion 3: skew reproduction
// ---------------------------------------------------------------------

fn counted_manifest(negatives: usize, positives: usize, synthetic: usize) -> DatasetManifest {
    let mut records = Vec::with_capacity(negatives + positives + synthetic);
    for i in 0..negatives {
        records.push(ManifestRecord {
            path: format!("n{i}.png"),
            sample_id: format!("n{i:06}"),
            patient_id: None,
            label: Label::Negative,
            provenance: Provenance::Real,
            source_domain: SourceDomain::Normal,
        });
    }
    for i in 0..positives {
        records.push(ManifestRecord {
            path: format!("p{i}.png"),
            sample_id: format!("p{i:06}"),
            patient_id: None,
            label: Label::Positive,
            provenance: Provenance::Real,
            source_domain: SourceDomain::Covid,
        });
    }
    for i in 0..synthetic {
        records.push(ManifestRecord {
            path: format!("s{i}.png"),
            sample_id: format!("s{i:06}"),
            patient_id: None,
            label: Label::Positive,
            provenance: Provenance::Synthetic,
            source_domain: SourceDomain::Covid,
        });
    }
    DatasetManifest::new("task", records).unwrap()
}

#[test]
fn c03_skew_reproduction() {
    // Normal-task training distribution: 16,537 negatives / 180 positives.
    let skew = compute_skew(&counted_manifest(16_537, 180, 0)).unwrap();
    assert!((skew.skew - 91.87).abs() <= 0.01, "{}", skew.skew);

    // After adding 16,537 synthetic positives: 16,537 / 16,717.
    let skew = compute_skew(&counted_manifest(16_537, 180, 16_537)).unwrap();
    assert!((skew.skew - 0.98).abs() <= 0.01, "{}", skew.skew);

    // Pneumonia-task reference ratios (22.9, 0.95, 0.19) are checked for
    // formula consistency only: the published counts are internally
    // inconsistent. A 22.9 training skew with 180 positives implies 4,122
    // majority images, yet 4,758 synthetic images were generated from that
    // majority; no single count set reproduces all three ratios. Each ratio
    // is checked against the count set that reproduces it, tolerance 0.1.
    let ratio = |neg: usize, pos: usize| neg as f64 / pos as f64;
    assert!((ratio(4_122, 180) - 22.9).abs() <= 0.1);
    // Real + synthetic positives with the 4,758-image majority reading.
    assert!((ratio(4_758, 180 + 4_758) - 0.95).abs() <= 0.1);
    // Both count readings land within tolerance for the fully augmented row.
    assert!((ratio(4_758, 180 + 4_758 + 16_537) - 0.19).abs() <= 0.1);
    assert!((ratio(4_122, 180 + 4_758 + 16_537) - 0.19).abs() <= 0.1);
    // The inconsistency itself, pinned down: the 4,122-count reading fails
    // the 0.95 row by more than the tolerance.
    assert!((ratio(4_122, 180 + 4_758) - 0.95).abs() > 0.1);

    // The implementation agrees with the direct ratio on those counts.
    let implementation = compute_skew(&counted_manifest(4_122, 180, 0)).unwrap();
    assert_eq!(implementation.skew, ratio(4_122, 180));

    println!("[criterion 3] PASS - skew ratios reproduce (91.87, 0.98); task ratios formula-consistent within 0.1");
}

// ---------------------------------------------------------------------
// criterion 4: sensitivity reproduction
// ---------------------------------------------------------------------

#[test]
fn c04_sensitivity_reproduction() {
    assert!((sensitivity(9, 37).unwrap() - 19.56).abs() <= 0.01);
    assert!((sensitivity(29, 17).unwrap() - 63.04).abs() <= 0.01);
    assert!((sensitivity(4, 42).unwrap() - 8.69).abs() <= 0.01);
    println!("[criterion 4] PASS - sensitivity values reproduce within 0.01");
}

// ---------------------------------------------------------------------
// criterion 5: toy translation convergence
// ---------------------------------------------------------------------

const TOY_SIZE: usize = 64;

fn probe_input(unit_batch: &Array4<Real>) -> Array4<Real> {
    let (n, _, h, w) = unit_batch.dim();
    Array4::from_shape_fn((n, 3, h, w), |(i, _, y, x)| unit_batch[[i, 0, y, x]])
}

/// Train the frozen probe that separates the two toy domains.
fn train_probe(corpus: &Path, manifest: &DatasetManifest) -> TrainedClassifier {
    let config = TrainingConfig {
        name: "probe".into(),
        backbone: Backbone::Custom,
        learning_rate: 1.0,
        batch_size: 16,
        early_stop_patience: 10,
        early_stop_min_delta: 1e-4,
        max_epochs: 8,
        seed: 99,
        ..TrainingConfig::default()
    };
    // Domain labels align with class labels in the toy rule (A = negative,
    // B = positive), so classifier training doubles as domain training.
    train_classifier(&config, manifest, corpus, TOY_SIZE, None).unwrap()
}

fn probe_domain_accuracy(
    probe: &mut TrainedClassifier,
    images_a: &[Array4<Real>],
    images_b: &[Array4<Real>],
) -> f64 {
    let mut correct = 0usize;
    for (images, positive) in [(images_a, false), (images_b, true)] {
        for img in images {
            let x = probe_input(&img.mapv(|v| (v + 1.0) / 2.0));
            let probs = softmax(&probe.net.logits(&x, false));
            let said_positive = probs[[0, 1]] > 0.5;
            if said_positive == positive {
                correct += 1;
            }
        }
    }
    correct as f64 / (images_a.len() + images_b.len()) as f64
}

#[test]
fn c05_toy_translation_convergence() {
    let started = std::time::Instant::now();
    let corpus = TempDir::new().unwrap();
    generate_toy_corpus(
        corpus.path(),
        &ToySpec {
            n_a: 200,
            n_b: 200,
            size: TOY_SIZE,
            seed: 11,
        },
    )
    .unwrap();
    let full = ingest_directory(corpus.path(), "toy", &toy_label_rule())
        .unwrap()
        .manifest;
    let domain_a = full.filter_by_label(Label::Negative).unwrap();
    let domain_b = full.filter_by_label(Label::Positive).unwrap();
    let images_a = load_domain(&domain_a, corpus.path(), TOY_SIZE).unwrap();
    let images_b = load_domain(&domain_b, corpus.path(), TOY_SIZE).unwrap();

    // Frozen probe, pre-trained to at least 99% domain accuracy.
    let mut probe = train_probe(corpus.path(), &full);
    let accuracy = probe_domain_accuracy(&mut probe, &images_a, &images_b);
    assert!(
        accuracy >= 0.99,
        "probe accuracy {:.2}% below 99%",
        accuracy * 100.0
    );

    // 500 generator updates (the criterion allows up to 2,000).
    let steps = 500usize;
    let gen_spec = GeneratorSpec {
        input_channels: 1,
        base_width: 12,
        residual_blocks: 2,
        output_activation: OutputActivation::Tanh,
    };
    let disc_spec = DiscriminatorSpec::new(1, 3, 16);
    let hp = GanHyperparams {
        lambda_cycle: 10.0,
        learning_rate: 2e-4,
        batch_size: 1,
        total_steps: steps,
        adversarial_mode: AdversarialMode::LeastSquares,
        image_pool_size: 50,
        seed: 3,
    };
    let mut model = init_model(&gen_spec, &disc_spec, &hp).unwrap();
    run_steps(
        &mut model,
        &images_a,
        &images_b,
        steps,
        &TrainOptions {
            image_size: TOY_SIZE,
            checkpoint_every: None,
            checkpoint_dir: None,
            log_every: 0,
        },
    )
    .unwrap();

    // (a) Cycle-reconstruction error at the end of training is at most half
    // of its first-10-step average.
    let first10: f64 = model.loss_history[..10].iter().map(|b| b.cycle).sum::<f64>() / 10.0;
    let last10: f64 =
        model.loss_history.iter().rev().take(10).map(|b| b.cycle).sum::<f64>() / 10.0;
    assert!(
        last10 <= 0.5 * first10,
        "cycle error {last10:.4} not below half of first-10 average {first10:.4}"
    );

    // (b) The frozen probe labels at least 70% of translated majority images
    // as target-domain.
    let mut target_votes = 0usize;
    for img in &images_a {
        let unit = img.mapv(|v| (v + 1.0) / 2.0);
        let translated =
            cyclesynth_core::gan::translate(&mut model, &unit, Direction::AToB).unwrap();
        let probs = softmax(&probe.net.logits(&probe_input(&translated), false));
        if probs[[0, 1]] > 0.5 {
            target_votes += 1;
        }
    }
    let transfer = target_votes as f64 / images_a.len() as f64;
    assert!(
        transfer >= 0.70,
        "probe labeled only {:.1}% of translated images as target-domain",
        transfer * 100.0
    );

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 1800.0, "convergence run exceeded 30 minutes");
    println!(
        "[criterion 5] PASS - cycle {first10:.3} -> {last10:.3}, transfer {:.1}%, {:.0}s",
        transfer * 100.0,
        elapsed
    );
}

// ---------------------------------------------------------------------
// criterion 6: end-to-end protocol smoke
// ---------------------------------------------------------------------

fn smoke_config_json(data_root: &Path, output_root: &Path) -> String {
    let gan_section = r#"{
    "generator": {"input_channels": 1, "base_width": 10, "residual_blocks": 2, "output_activation": "tanh"},
    "discriminator": {"input_channels": 1, "layers": 3, "base_width": 12, "receptive_field": 34},
    "hyperparams": {"lambda_cycle": 10.0, "learning_rate": 0.0002, "batch_size": 1, "total_steps": 80, "adversarial_mode": "least_squares", "image_pool_size": 20, "seed": 0}
  }"#;
    let clf = |name: &str, real: bool, g1: bool, g2: bool| {
        format!(
            r#"{{"name": "{name}", "backbone": "custom", "include_real": {real}, "include_g1": {g1}, "include_g2": {g2}, "learning_rate": 1.0, "batch_size": 16, "early_stop_patience": 4, "early_stop_min_delta": 0.0001, "max_epochs": 6, "densenet_depth": 121, "seed": 0}}"#
        )
    };
    format!(
        r#"{{
  "version": 1,
  "task_name": "toy",
  "data_root": {data_root:?},
  "negative_dir": "domain_a",
  "positive_dir": "domain_b",
  "negative_domain": "toy_a",
  "positive_domain": "toy_b",
  "image_size": {TOY_SIZE},
  "train_fraction": 0.8,
  "split_unit": "patient",
  "gan": {gan_section},
  "second_gan": {gan_section},
  "classifiers": [{real}, {real_g1}, {real_g1_g2}, {only_synth}],
  "threshold": 0.5,
  "embedding": {{"n_neighbors": 8, "min_dist": 0.1, "n_epochs": 40, "source": "raw_pixels", "classifier": null, "max_points": 200}},
  "output_root": {output_root:?},
  "seed": 42
}}"#,
        data_root = data_root.to_string_lossy(),
        output_root = output_root.to_string_lossy(),
        real = clf("real", true, false, false),
        real_g1 = clf("real_g1", true, true, false),
        real_g1_g2 = clf("real_g1_g2", true, true, true),
        only_synth = clf("only_synthetic", false, true, false),
    )
}

#[test]
fn c06_end_to_end_protocol_smoke() {
    let started = std::time::Instant::now();
    let work = TempDir::new().unwrap();
    let data_root = work.path().join("corpus");
    let output_root = work.path().join("out");
    generate_toy_corpus(
        &data_root,
        &ToySpec {
            n_a: 120,
            n_b: 50,
            size: TOY_SIZE,
            seed: 5,
        },
    )
    .unwrap();
    let config_path = work.path().join("run.json");
    std::fs::write(&config_path, smoke_config_json(&data_root, &output_root)).unwrap();

    let config = cyclesynth_core::pipeline::RunConfig::load(&config_path).unwrap();
    let summary = cyclesynth_core::pipeline::run_pipeline(&config).unwrap();
    assert!(summary.stages_run.len() >= 10);

    // All four configurations produced a valid report on the same
    // synthetic-free test manifest.
    let mut digests = Vec::new();
    for name in ["real", "real_g1", "real_g1_g2", "only_synthetic"] {
        let report: cyclesynth_core::eval::EvalReport =
            cyclesynth_core::io::read_json(&output_root.join("runs").join(name).join("metrics.json"))
                .unwrap();
        assert_eq!(report.config_id, name);
        let total = report.true_positives
            + report.false_positives
            + report.true_negatives
            + report.false_negatives;
        assert!(total > 0);
        assert_eq!(report.confidences.len(), total);
        assert!((0.0..=100.0).contains(&report.sensitivity));
        digests.push(report.test_digest.clone());
    }
    assert!(digests.windows(2).all(|w| w[0] == w[1]), "test digests differ");

    let test = DatasetManifest::load("toy", &output_root.join("manifests/test.jsonl")).unwrap();
    assert_eq!(test.count_provenance(Provenance::Synthetic), 0);

    // Rerunning the unchanged config skips every stage via digest match.
    let rerun = cyclesynth_core::pipeline::run_pipeline(&config).unwrap();
    assert!(rerun.stages_run.is_empty(), "reran: {:?}", rerun.stages_run);
    assert!(rerun.stages_skipped.len() >= 10);

    // Injecting a synthetic record into the shared test manifest must abort
    // the pipeline with exit code 3 (protocol violation).
    let synth_line = std::fs::read_to_string(output_root.join("synthetic/g1/manifest.jsonl"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let test_path = output_root.join("manifests/test.jsonl");
    let mut contents = std::fs::read_to_string(&test_path).unwrap();
    contents.push_str(&synth_line);
    contents.push('\n');
    std::fs::write(&test_path, contents).unwrap();

    let status = std::process::Command::new(env!("CARGO_BIN_EXE_cyclesynth"))
        .args(["run", "--config"])
        .arg(&config_path)
        .output()
        .expect("binary runs");
    assert_eq!(
        status.status.code(),
        Some(3),
        "expected exit code 3, stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );

    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < 600.0,
        "smoke run took {elapsed:.0}s, over the 10-minute budget"
    );
    println!("[criterion 6] PASS - four configs, shared digest, exit 3 on protocol violation, {elapsed:.0}s");
}

// ---------------------------------------------------------------------
// criterion 7: split property suite
// ---------------------------------------------------------------------

#[test]
fn c07_split_property_suite() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2024);
    for case in 0..1000u64 {
        let patients = rng.random_range(2..60usize);
        let mut records = Vec::new();
        let mut idx = 0usize;
        for p in 0..patients {
            let images = rng.random_range(1..4usize);
            for _ in 0..images {
                records.push(ManifestRecord {
                    path: format!("{idx}.png"),
                    sample_id: format!("s{idx:05}"),
                    patient_id: Some(format!("p{p:04}")),
                    label: if rng.random::<bool>() {
                        Label::Positive
                    } else {
                        Label::Negative
                    },
                    provenance: Provenance::Real,
                    source_domain: SourceDomain::ToyA,
                });
                idx += 1;
            }
        }
        let manifest = DatasetManifest::new("prop", records).unwrap();
        let spec = SplitSpec {
            train_fraction: 0.8,
            seed: case,
            unit: SplitUnit::Patient,
        };
        let (train, test) = patient_level_split(&manifest, &spec).unwrap();
        let train_patients = train.patient_ids();
        let test_patients = test.patient_ids();
        assert!(
            train_patients.intersection(&test_patients).next().is_none(),
            "case {case}: patient overlap"
        );
        assert_eq!(train.len() + test.len(), manifest.len());
        let target = 0.8 * patients as f64;
        assert!(
            (train_patients.len() as f64 - target).abs() <= 1.0,
            "case {case}: train patients {} vs target {target}",
            train_patients.len()
        );
    }
    println!("[criterion 7] PASS - 1000 randomized manifests: zero overlap, counts within +-1 of 80/20");
}

// ---------------------------------------------------------------------
// criterion 8: determinism suite
// ---------------------------------------------------------------------

#[test]
fn c08_determinism_suite() {
    // Manifests: the same corpus ingested from two identical trees has the
    // same digest.
    let spec = ToySpec {
        n_a: 10,
        n_b: 6,
        size: 32,
        seed: 77,
    };
    let d1 = TempDir::new().unwrap();
    let d2 = TempDir::new().unwrap();
    generate_toy_corpus(d1.path(), &spec).unwrap();
    generate_toy_corpus(d2.path(), &spec).unwrap();
    let m1 = ingest_directory(d1.path(), "toy", &toy_label_rule()).unwrap().manifest;
    let m2 = ingest_directory(d2.path(), "toy", &toy_label_rule()).unwrap().manifest;
    assert_eq!(m1.content_digest, m2.content_digest);

    // Undersampling selections repeat bit-identically per seed.
    let big = counted_manifest(300, 20, 0);
    let s1 = undersample_majority(&big, 40, 9).unwrap();
    let s2 = undersample_majority(&big, 40, 9).unwrap();
    assert_eq!(s1.to_jsonl(), s2.to_jsonl());

    // Embedding coordinates repeat bit-identically.
    let features = ndarray::Array2::from_shape_fn((40, 6), |(i, j)| {
        (((i * 31 + j * 7) % 17) as f64) / 17.0
    });
    let params = UmapParams {
        n_neighbors: 8,
        n_epochs: 60,
        seed: 5,
        ..UmapParams::default()
    };
    let ids: Vec<String> = (0..40).map(|i| format!("s{i}")).collect();
    let labels: Vec<String> = (0..40).map(|i| format!("c{}", i % 2)).collect();
    let e1 = compute_embedding(&features, ids.clone(), labels.clone(), &params).unwrap();
    let e2 = compute_embedding(&features, ids, labels, &params).unwrap();
    assert_eq!(e1.coordinates, e2.coordinates);

    // Classifier training repeats to well within 1e-4 (bitwise on this
    // deterministic backend).
    let corpus = TempDir::new().unwrap();
    generate_toy_corpus(
        corpus.path(),
        &ToySpec {
            n_a: 12,
            n_b: 12,
            size: 32,
            seed: 31,
        },
    )
    .unwrap();
    let manifest = ingest_directory(corpus.path(), "toy", &toy_label_rule()).unwrap().manifest;
    let cfg = TrainingConfig {
        name: "det".into(),
        backbone: Backbone::Custom,
        learning_rate: 1.0,
        max_epochs: 3,
        seed: 13,
        ..TrainingConfig::default()
    };
    let r1 = train_classifier(&cfg, &manifest, corpus.path(), 32, None).unwrap();
    let r2 = train_classifier(&cfg, &manifest, corpus.path(), 32, None).unwrap();
    assert_eq!(r1.stopped_epoch, r2.stopped_epoch);
    let (l1, l2) = (*r1.curve.last().unwrap(), *r2.curve.last().unwrap());
    assert!((l1 - l2).abs() <= 1e-4, "{l1} vs {l2}");

    println!("[criterion 8] PASS - manifests, selections, embeddings, and training losses reproduce");
}

// ---------------------------------------------------------------------
// criterion 9: softmax and confidence reconciliation
// ---------------------------------------------------------------------

#[test]
fn c09_softmax_and_confidence_reconciliation() {
    let corpus = TempDir::new().unwrap();
    generate_toy_corpus(
        corpus.path(),
        &ToySpec {
            n_a: 40,
            n_b: 40,
            size: 32,
            seed: 55,
        },
    )
    .unwrap();
    let full = ingest_directory(corpus.path(), "toy", &toy_label_rule()).unwrap().manifest;
    let (train, test) = patient_level_split(
        &full,
        &SplitSpec {
            train_fraction: 0.8,
            seed: 2,
            unit: SplitUnit::Patient,
        },
    )
    .unwrap();
    let cfg = TrainingConfig {
        name: "conf".into(),
        backbone: Backbone::Custom,
        learning_rate: 1.0,
        max_epochs: 4,
        seed: 8,
        ..TrainingConfig::default()
    };
    let mut model = train_classifier(&cfg, &train, corpus.path(), 32, None).unwrap();

    // Probability pairs sum to one within 1e-6 (checked on raw batches).
    let (inputs, _) =
        cyclesynth_core::classifier::train::load_classifier_inputs(&test, corpus.path(), 32)
            .unwrap();
    let views: Vec<_> = inputs.iter().map(|t| t.view()).collect();
    let batch = ndarray::concatenate(Axis(0), &views).unwrap();
    let probs = cyclesynth_core::classifier::predict_proba(&mut model, &batch).unwrap();
    for row in probs.rows() {
        assert!((row.sum() - 1.0).abs() < 1e-6);
    }
    // Duplicated inputs give identical rows.
    let twice = ndarray::concatenate(Axis(0), &[inputs[0].view(), inputs[0].view()]).unwrap();
    let p2 = cyclesynth_core::classifier::predict_proba(&mut model, &twice).unwrap();
    assert_eq!(p2.row(0), p2.row(1));

    // Confidence scores reconcile exactly with evaluate's TP/FN at 0.5.
    let report = evaluate(&mut model, &test, corpus.path(), 32, 0.5).unwrap();
    let positives = test.filter_by_label(Label::Positive).unwrap();
    let scores = confidence_scores(&mut model, &positives, corpus.path(), 32).unwrap();
    assert_eq!(scores.len(), positives.len());
    let above = scores.iter().filter(|&&p| p > 0.5).count();
    let below = scores.len() - above;
    assert_eq!(above, report.true_positives);
    assert_eq!(below, report.false_negatives);

    println!("[criterion 9] PASS - probability pairs sum to one; confidences reconcile with TP/FN");
}

// ---------------------------------------------------------------------
// criterion 10: desk-scale limitation is documented
// ---------------------------------------------------------------------

#[test]
fn c10_full_scale_runs_documented_not_reproduced() {
    // The absolute sensitivity tables on real radiograph data require the
    // source medical datasets and long GPU training; this artifact documents
    // the full-scale protocol instead of reproducing it. The criterion here
    // is that the documentation and a ready-to-edit configuration ship with
    // the repository.
    let repo_root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let doc = repo_root.join("docs/real-data.md");
    let config = repo_root.join("configs/real_normal_vs_covid.json");
    let doc_text = std::fs::read_to_string(&doc).expect("docs/real-data.md must exist");
    for needle in ["gen-toy", "run --config", "patients.json", "256"] {
        assert!(
            doc_text.contains(needle),
            "real-data doc must mention `{needle}`"
        );
    }
    let config_text = std::fs::read_to_string(&config).expect("real-data config must exist");
    let parsed: serde_json::Value = serde_json::from_str(&config_text).unwrap();
    assert_eq!(parsed["image_size"], 256);
    println!("[criterion 10] PASS - full-scale protocol documented with a ready config (not reproduced at desk scale)");
}
