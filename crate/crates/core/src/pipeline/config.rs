//! Run configuration: versioned JSON schema, validated before any compute.

use crate::classifier::TrainingConfig;
use crate::data::{SourceDomain, SplitUnit};
use crate::embed::FeatureSource;
use crate::error::{Error, Result};
use crate::gan::{DiscriminatorSpec, GanHyperparams, GeneratorSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GanSection {
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
    /// The `seed` field is overridden by the global seed derivation.
    pub hyperparams: GanHyperparams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingSection {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub n_epochs: usize,
    pub source: FeatureSource,
    /// Name of the classifier config whose features to embed; defaults to
    /// the first config. Ignored for `raw_pixels`.
    pub classifier: Option<String>,
    /// Upper bound on embedded points (deterministically subsampled).
    pub max_points: usize,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection {
            n_neighbors: 15,
            min_dist: 0.1,
            n_epochs: 200,
            source: FeatureSource::ClassifierFeatures,
            classifier: None,
            max_points: 600,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    pub task_name: String,
    /// Dataset root containing the two class subdirectories (and optionally
    /// `patients.json`).
    pub data_root: PathBuf,
    pub negative_dir: String,
    pub positive_dir: String,
    pub negative_domain: SourceDomain,
    pub positive_domain: SourceDomain,
    /// Working resolution (must be divisible by 4 for the translation
    /// engine).
    pub image_size: usize,
    pub train_fraction: f64,
    pub split_unit: SplitUnit,
    pub gan: GanSection,
    /// Second translation model; required when any classifier config sets
    /// `include_g2`.
    pub second_gan: Option<GanSection>,
    pub classifiers: Vec<TrainingConfig>,
    pub threshold: f64,
    pub embedding: EmbeddingSection,
    pub output_root: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: RunConfig = crate::io::read_json(path)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !self.data_root.is_dir() {
            return Err(Error::Config(format!(
                "data_root {} does not exist",
                self.data_root.display()
            )));
        }
        for dir in [&self.negative_dir, &self.positive_dir] {
            if !self.data_root.join(dir).is_dir() {
                return Err(Error::Config(format!(
                    "class directory `{dir}` missing under {}",
                    self.data_root.display()
                )));
            }
        }
        if self.image_size % 4 != 0 || self.image_size < 16 {
            return Err(Error::Config(
                "image_size must be >= 16 and divisible by 4".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.train_fraction) || self.train_fraction == 0.0 {
            return Err(Error::Config("train_fraction must be in (0, 1)".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("at least one classifier config".into()));
        }
        let mut names = BTreeSet::new();
        for cfg in &self.classifiers {
            cfg.validate()?;
            if !names.insert(cfg.name.clone()) {
                return Err(Error::Config(format!(
                    "duplicate classifier config name `{}`",
                    cfg.name
                )));
            }
            if cfg.include_g2 && self.second_gan.is_none() {
                return Err(Error::Config(format!(
                    "config `{}` includes the second synthetic set but no second_gan is defined",
                    cfg.name
                )));
            }
        }
        if let Some(name) = &self.embedding.classifier {
            if !names.contains(name) {
                return Err(Error::Config(format!(
                    "embedding references unknown classifier `{name}`"
                )));
            }
        }
        self.gan.generator.validate()?;
        self.gan.discriminator.validate()?;
        self.gan.hyperparams.validate()?;
        if let Some(second) = &self.second_gan {
            second.generator.validate()?;
            second.discriminator.validate()?;
            second.hyperparams.validate()?;
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must be in [0, 1]".into()));
        }
        Ok(())
    }
}
