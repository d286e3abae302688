//! Classifier bench: transfer-style image classifiers (a configurable
//! backbone, a global-average-pooling layer, and a two-unit softmax head),
//! the four training-set configurations, and the fixed training protocol
//! (binary cross-entropy, Adadelta at the configured rate, early stopping on
//! training loss).

pub mod assemble;
pub mod backbones;
pub mod train;

pub use assemble::assemble_training_set;
pub use backbones::{build_classifier, ClassifierNet, FeatureHead};
pub use train::{predict_proba, train_classifier, TrainedClassifier};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Vgg16,
    Resnet50,
    Densenet,
    /// Small four-block CNN trained from scratch; the desk-scale default used
    /// by the acceptance suite (no pretrained weights required).
    Custom,
}

/// One classifier training run: backbone choice, data-composition flags, and
/// optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Identifier used in run directories and comparison tables.
    pub name: String,
    pub backbone: Backbone,
    /// Keep the real minority-class positives in the training set.
    pub include_real: bool,
    /// Add the first synthetic set.
    pub include_g1: bool,
    /// Add the second synthetic set.
    pub include_g2: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub early_stop_patience: usize,
    pub early_stop_min_delta: f64,
    /// Upper bound on epochs; early stopping usually fires first.
    pub max_epochs: usize,
    /// Dense-block depth when `backbone` is `densenet` (121, 169, or 201).
    pub densenet_depth: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            name: "real".into(),
            backbone: Backbone::Custom,
            include_real: true,
            include_g1: false,
            include_g2: false,
            learning_rate: 0.001,
            batch_size: 16,
            early_stop_patience: 10,
            early_stop_min_delta: 1e-4,
            max_epochs: 50,
            densenet_depth: 121,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.include_real || self.include_g1 || self.include_g2) {
            return Err(Error::Config(
                "at least one of include_real/include_g1/include_g2 must be set".into(),
            ));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}
