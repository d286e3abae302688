//! Tuning harness for the toy translation run: trains blob->ring on a
//! procedurally generated corpus and reports cycle-loss convergence, probe
//! transfer rate, and wall time. Not part of the test suite.

use cyclesynth_core::classifier::{build_classifier, Backbone, TrainingConfig};
use cyclesynth_core::data::ingest_directory;
use cyclesynth_core::gan::train::{load_domain, run_steps, init_model, TrainOptions};
use cyclesynth_core::gan::{
    AdversarialMode, DiscriminatorSpec, GanHyperparams, GeneratorSpec, OutputActivation,
};
use cyclesynth_core::nn::loss::{cross_entropy, cross_entropy_grad, softmax};
use cyclesynth_core::nn::optim::Adadelta;
use cyclesynth_core::nn::{zero_grads, Layer};
use cyclesynth_core::toy::{generate_toy_corpus, toy_label_rule, ToySpec};
use cyclesynth_core::Real;
use ndarray::{concatenate, Array4, Axis};
use std::time::Instant;

fn arg<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::args()
        .skip_while(|a| a != name)
        .nth(1)
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() {
    let steps: usize = arg("--steps", 800);
    let width: usize = arg("--width", 12);
    let blocks: usize = arg("--blocks", 2);
    let d_layers: usize = arg("--d-layers", 3);
    let d_width: usize = arg("--d-width", 16);
    let lambda: f64 = arg("--lambda", 10.0);
    let pool: usize = arg("--pool", 50);
    let size: usize = arg("--size", 64);
    let n: usize = arg("--n", 200);
    let mode = if arg("--log-mode", 0i32) == 1 {
        AdversarialMode::Log
    } else {
        AdversarialMode::LeastSquares
    };

    let dir = tempfile::tempdir().unwrap();
    generate_toy_corpus(
        dir.path(),
        &ToySpec {
            n_a: n,
            n_b: n,
            size,
            seed: 11,
        },
    )
    .unwrap();
    let full = ingest_directory(dir.path(), "toy", &toy_label_rule())
        .unwrap()
        .manifest;
    let domain_a = full.filter_by_label(cyclesynth_core::data::Label::Negative).unwrap();
    let domain_b = full.filter_by_label(cyclesynth_core::data::Label::Positive).unwrap();

    let gen_spec = GeneratorSpec {
        input_channels: 1,
        base_width: width,
        residual_blocks: blocks,
        output_activation: OutputActivation::Tanh,
    };
    let disc_spec = DiscriminatorSpec::new(1, d_layers, d_width);
    let hp = GanHyperparams {
        lambda_cycle: lambda,
        learning_rate: 2e-4,
        batch_size: 1,
        total_steps: steps,
        adversarial_mode: mode,
        image_pool_size: pool,
        seed: 3,
    };

    // Probe classifier: blob (0) vs ring (1), trained on raw domains.
    eprintln!("training probe classifier...");
    let probe_t0 = Instant::now();
    let images_a = load_domain(&domain_a, dir.path(), size).unwrap();
    let images_b = load_domain(&domain_b, dir.path(), size).unwrap();
    let mut probe = build_probe(&images_a, &images_b);
    let acc = probe_accuracy(&mut probe, &images_a, &images_b);
    eprintln!(
        "probe accuracy {:.2}% ({:.1}s)",
        acc * 100.0,
        probe_t0.elapsed().as_secs_f64()
    );

    let t0 = Instant::now();
    let mut model = init_model(&gen_spec, &disc_spec, &hp).unwrap();
    let opts = TrainOptions {
        image_size: size,
        checkpoint_every: None,
        checkpoint_dir: None,
        log_every: 100,
    };
    run_steps(&mut model, &images_a, &images_b, steps, &opts).unwrap();
    let train_secs = t0.elapsed().as_secs_f64();

    let first10: f64 = model.loss_history[..10.min(model.loss_history.len())]
        .iter()
        .map(|b| b.cycle)
        .sum::<f64>()
        / 10.0f64.min(model.loss_history.len() as f64);
    let last = model.loss_history.last().unwrap().cycle;
    let tail20: f64 = model
        .loss_history
        .iter()
        .rev()
        .take(20)
        .map(|b| b.cycle)
        .sum::<f64>()
        / 20.0f64.min(model.loss_history.len() as f64);

    // Translate all of domain A and ask the probe how ring-like they look.
    let mut ring_votes = 0usize;
    for img in &images_a {
        let unit = img.mapv(|v| (v + 1.0) / 2.0);
        let translated =
            cyclesynth_core::gan::translate(&mut model, &unit, cyclesynth_core::gan::Direction::AToB)
                .unwrap();
        let logits = probe.net.logits(&to_probe_input(&translated), false);
        let probs = softmax(&logits);
        if probs[[0, 1]] > 0.5 {
            ring_votes += 1;
        }
    }
    let transfer = ring_votes as f64 / images_a.len() as f64;

    println!(
        "steps={steps} width={width} blocks={blocks} d={d_layers}x{d_width} mode={mode:?} pool={pool}"
    );
    println!(
        "train {:.1}s ({:.2} steps/s)",
        train_secs,
        steps as f64 / train_secs
    );
    println!("cycle first10 {first10:.4} last {last:.4} tail20 {tail20:.4} ratio(last/first10) {:.3} ratio(tail20/first10) {:.3}", last / first10, tail20 / first10);
    println!("probe accuracy {:.1}%, transfer rate {:.1}%", acc * 100.0, transfer * 100.0);
}

fn to_probe_input(unit_batch: &Array4<Real>) -> Array4<Real> {
    let (n, _, h, w) = unit_batch.dim();
    Array4::from_shape_fn((n, 3, h, w), |(i, _, y, x)| unit_batch[[i, 0, y, x]])
}

fn build_probe(
    images_a: &[Array4<Real>],
    images_b: &[Array4<Real>],
) -> cyclesynth_core::classifier::train::TrainedClassifier {
    let config = TrainingConfig {
        name: "probe".into(),
        backbone: Backbone::Custom,
        max_epochs: 8,
        batch_size: 16,
        learning_rate: 1.0,
        seed: 99,
        ..TrainingConfig::default()
    };
    let mut net = build_classifier(&config).unwrap();
    let mut optimizer = Adadelta::<Real>::new(config.learning_rate);
    let mut order: Vec<(usize, usize)> = (0..images_a.len())
        .map(|i| (0usize, i))
        .chain((0..images_b.len()).map(|i| (1usize, i)))
        .collect();
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
    for epoch in 0..config.max_epochs {
        cyclesynth_core::nn::init::shuffle(&mut order, &mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let tensors: Vec<Array4<Real>> = chunk
                .iter()
                .map(|&(d, i)| {
                    let img = if d == 0 { &images_a[i] } else { &images_b[i] };
                    to_probe_input(&img.mapv(|v| (v + 1.0) / 2.0))
                })
                .collect();
            let views: Vec<_> = tensors.iter().map(|t| t.view()).collect();
            let x = concatenate(Axis(0), &views).unwrap();
            let labels: Vec<usize> = chunk.iter().map(|&(d, _)| d).collect();
            zero_grads(&mut net);
            let logits = net.logits(&x, true);
            let probs = softmax(&logits);
            loss_sum += cross_entropy(&probs, &labels) as f64;
            let grad = cross_entropy_grad(&probs, &labels);
            let (nn, c) = grad.dim();
            net.backward(&grad.into_shape_with_order((nn, c, 1, 1)).unwrap());
            optimizer.step(&mut net);
        }
        eprintln!("probe epoch {epoch}: loss {loss_sum:.3}");
    }
    cyclesynth_core::classifier::train::TrainedClassifier {
        net,
        curve: vec![],
        stopped_epoch: config.max_epochs,
        config,
    }
}

fn probe_accuracy(
    model: &mut cyclesynth_core::classifier::train::TrainedClassifier,
    images_a: &[Array4<Real>],
    images_b: &[Array4<Real>],
) -> f64 {
    let mut correct = 0usize;
    for img in images_a {
        let x = to_probe_input(&img.mapv(|v| (v + 1.0) / 2.0));
        let probs = softmax(&model.net.logits(&x, false));
        if probs[[0, 0]] > 0.5 {
            correct += 1;
        }
    }
    for img in images_b {
        let x = to_probe_input(&img.mapv(|v| (v + 1.0) / 2.0));
        let probs = softmax(&model.net.logits(&x, false));
        if probs[[0, 1]] > 0.5 {
            correct += 1;
        }
    }
    correct as f64 / (images_a.len() + images_b.len()) as f64
}
