//! Classifier training: binary cross-entropy minimized with Adadelta at the
//! configured rate, per-epoch seeded shuffling, and early stopping on
//! training loss (the protocol tunes nothing and holds no validation set).

use super::backbones::{build_classifier, ClassifierNet};
use super::TrainingConfig;
use crate::data::{load_sample, preprocess_to, DatasetManifest, Label, ManifestRecord};
use crate::scalar::Scalar;
use crate::error::{Error, Result};
use crate::io::container::Container;
use crate::nn::init::shuffle;
use crate::nn::loss::{cross_entropy, cross_entropy_grad, softmax};
use crate::nn::optim::Adadelta;
use crate::nn::{export_buffers, export_params, import_state, zero_grads, Layer};
use crate::Real;
use ndarray::{Array2, Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub struct TrainedClassifier {
    pub net: ClassifierNet,
    /// Mean training loss per epoch.
    pub curve: Vec<f64>,
    /// Number of epochs actually run.
    pub stopped_epoch: usize,
    pub config: TrainingConfig,
}

/// Load one record as a `3 x S x S` tensor in `[0, 1]`; grayscale replicates
/// to three channels at this boundary so manifests stay single-channel.
fn load_input(root: &Path, record: &ManifestRecord, size: usize) -> Result<Array4<Real>> {
    let sample = load_sample(root, record)?;
    let sample = preprocess_to(&sample, size)?;
    let (h, w, _) = sample.pixels.dim();
    Ok(Array4::from_shape_fn((1, 3, h, w), |(_, _, y, x)| {
        sample.pixels[[y, x, 0]]
    }))
}

/// Materialize a manifest into stacked inputs and class indices
/// (0 = negative, 1 = positive), in manifest order.
pub fn load_classifier_inputs(
    manifest: &DatasetManifest,
    root: &Path,
    size: usize,
) -> Result<(Vec<Array4<Real>>, Vec<usize>)> {
    let mut inputs = Vec::with_capacity(manifest.len());
    let mut labels = Vec::with_capacity(manifest.len());
    for record in &manifest.records {
        inputs.push(load_input(root, record, size)?);
        labels.push(match record.label {
            Label::Negative => 0,
            Label::Positive => 1,
        });
    }
    Ok((inputs, labels))
}

fn stack(batch: &[&Array4<Real>]) -> Array4<Real> {
    let views: Vec<_> = batch.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(0), &views).expect("batch stack")
}

/// Train a classifier on an assembled training set. Deterministic per seed:
/// fixed initialization, fixed shuffle stream, single-threaded arithmetic.
pub fn train_classifier(
    config: &TrainingConfig,
    train_set: &DatasetManifest,
    root: &Path,
    image_size: usize,
    snapshot_dir: Option<&Path>,
) -> Result<TrainedClassifier> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if train_set.count_label(Label::Negative) == 0 || train_set.count_label(Label::Positive) == 0 {
        return Err(Error::SingleClass);
    }

    let (inputs, labels) = load_classifier_inputs(train_set, root, image_size)?;
    let mut net = build_classifier(config)?;
    let mut optimizer = Adadelta::<Real>::new(config.learning_rate);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);

    let mut curve: Vec<f64> = Vec::new();
    let mut best = f64::INFINITY;
    let mut epochs_without_improvement = 0usize;
    let mut stopped_epoch = 0usize;

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        shuffle(&mut order, &mut rng);
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Array4<Real>> = chunk.iter().map(|&i| &inputs[i]).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let x = stack(&batch);
            zero_grads(&mut net);
            let logits = net.logits(&x, true);
            let probs = softmax(&logits);
            let loss = cross_entropy(&probs, &batch_labels).as_f64();
            if !loss.is_finite() {
                if let Some(dir) = snapshot_dir {
                    let _ = save_classifier_snapshot(&mut net, config, &curve, epoch, dir);
                }
                return Err(Error::NonFiniteLoss {
                    step: epoch,
                    detail: format!("batch loss {loss}"),
                });
            }
            loss_sum += loss * chunk.len() as f64;
            let grad2 = cross_entropy_grad(&probs, &batch_labels);
            let (n, c) = grad2.dim();
            let grad4 = grad2
                .into_shape_with_order((n, c, 1, 1))
                .expect("grad reshape");
            net.backward(&grad4);
            optimizer.step(&mut net);
        }
        let epoch_loss = loss_sum / inputs.len() as f64;
        curve.push(epoch_loss);
        stopped_epoch = epoch;

        if best - epoch_loss > config.early_stop_min_delta {
            best = epoch_loss;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement > config.early_stop_patience {
                break;
            }
        }
    }

    Ok(TrainedClassifier {
        net,
        curve,
        stopped_epoch,
        config: config.clone(),
    })
}

/// Class probabilities for a `[0, 1]` batch of shape `N x 3 x H x W`. Rows
/// sum to one within 1e-6; order is preserved; evaluation mode, so the call
/// is pure.
pub fn predict_proba(model: &mut TrainedClassifier, batch: &Array4<Real>) -> Result<Array2<Real>> {
    let (n, c, h, w) = batch.dim();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let min_side = match model.config.backbone {
        super::Backbone::Custom => 16,
        _ => 32,
    };
    if c != 3 || h < min_side || w < min_side {
        return Err(Error::ShapeMismatch(format!(
            "expected N x 3 x H x W with H, W >= {min_side}, got {:?}",
            batch.dim()
        )));
    }
    let logits = model.net.logits(batch, false);
    Ok(softmax(&logits))
}

/// Probabilities for every record of a manifest, in manifest order, loading
/// in fixed-size chunks.
pub fn predict_manifest(
    model: &mut TrainedClassifier,
    manifest: &DatasetManifest,
    root: &Path,
    image_size: usize,
) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::with_capacity(manifest.len());
    for chunk in manifest.records.chunks(32) {
        let mut tensors = Vec::with_capacity(chunk.len());
        for record in chunk {
            tensors.push(load_input(root, record, image_size)?);
        }
        let refs: Vec<&Array4<Real>> = tensors.iter().collect();
        let probs = predict_proba(model, &stack(&refs))?;
        for (record, row) in chunk.iter().zip(probs.rows()) {
            out.push((record.sample_id.clone(), row[1].as_f64()));
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ClassifierMeta {
    format: String,
    config: TrainingConfig,
    curve: Vec<f64>,
    stopped_epoch: usize,
}

const FORMAT: &str = "classifier";

fn classifier_container(
    net: &mut ClassifierNet,
    config: &TrainingConfig,
    curve: &[f64],
    stopped_epoch: usize,
) -> Container {
    let meta = ClassifierMeta {
        format: FORMAT.into(),
        config: config.clone(),
        curve: curve.to_vec(),
        stopped_epoch,
    };
    let mut container = Container::new(serde_json::to_string(&meta).expect("meta"));
    for (name, tensor) in export_params(net) {
        container.tensors.push((name, tensor));
    }
    for (name, tensor) in export_buffers(net) {
        container.tensors.push((name, tensor));
    }
    container
}

pub fn save_classifier(model: &mut TrainedClassifier, path: &Path) -> Result<()> {
    classifier_container(
        &mut model.net,
        &model.config.clone(),
        &model.curve.clone(),
        model.stopped_epoch,
    )
    .save(path)
}

fn save_classifier_snapshot(
    net: &mut ClassifierNet,
    config: &TrainingConfig,
    curve: &[f64],
    epoch: usize,
    dir: &Path,
) -> Result<()> {
    classifier_container(net, config, curve, epoch).save(&dir.join("diverged.ckpt"))
}

pub fn load_classifier(path: &Path) -> Result<TrainedClassifier> {
    let container = Container::load(path)?;
    let meta: ClassifierMeta = serde_json::from_str(&container.meta_json)
        .map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
    if meta.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "expected a {FORMAT} archive, found `{}`",
            meta.format
        )));
    }
    let mut net = build_classifier(&meta.config)?;
    import_state(&mut net, &container.tensors, &container.tensors)?;
    Ok(TrainedClassifier {
        net,
        curve: meta.curve,
        stopped_epoch: meta.stopped_epoch,
        config: meta.config,
    })
}
