//! Feature matrices for embedding: flattened preprocessed pixels or the
//! classifier's pooled (GAP) features.

use crate::classifier::train::TrainedClassifier;
use crate::data::{load_sample, preprocess_to, DatasetManifest};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Real;
use ndarray::{Array2, Array4};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// Flattened single-channel preprocessed pixels (65,536 dimensions at
    /// the default 256 x 256 resolution).
    RawPixels,
    /// Global-average-pooled backbone features of a trained classifier.
    ClassifierFeatures,
}

/// One feature row per manifest record, in manifest (sample-id-sorted) order.
pub fn extract_features(
    manifest: &DatasetManifest,
    root: &Path,
    source: FeatureSource,
    model: Option<&mut TrainedClassifier>,
    image_size: usize,
) -> Result<Array2<f64>> {
    match source {
        FeatureSource::RawPixels => {
            let dim = image_size * image_size;
            let mut out = Array2::<f64>::zeros((manifest.len(), dim));
            for (i, record) in manifest.records.iter().enumerate() {
                let sample = load_sample(root, record)?;
                let sample = preprocess_to(&sample, image_size)?;
                for (j, &v) in sample.pixels.iter().enumerate() {
                    out[[i, j]] = v.as_f64();
                }
            }
            Ok(out)
        }
        FeatureSource::ClassifierFeatures => {
            let model = model.ok_or(Error::MissingModel)?;
            let dim = model.net.feature_dim;
            let mut out = Array2::<f64>::zeros((manifest.len(), dim));
            for (start, chunk) in manifest.records.chunks(32).enumerate().map(|(k, c)| (k * 32, c))
            {
                let mut tensors: Vec<Array4<Real>> = Vec::with_capacity(chunk.len());
                for record in chunk {
                    let sample = load_sample(root, record)?;
                    let sample = preprocess_to(&sample, image_size)?;
                    let (h, w, _) = sample.pixels.dim();
                    tensors.push(Array4::from_shape_fn((1, 3, h, w), |(_, _, y, x)| {
                        sample.pixels[[y, x, 0]]
                    }));
                }
                let views: Vec<_> = tensors.iter().map(|t| t.view()).collect();
                let batch = ndarray::concatenate(ndarray::Axis(0), &views).expect("batch");
                let feats = model.net.features(&batch, false);
                for (bi, row) in feats.rows().into_iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        out[[start + bi, j]] = v.as_f64();
                    }
                }
            }
            Ok(out)
        }
    }
}
