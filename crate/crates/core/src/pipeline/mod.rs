//! Declarative pipeline: a versioned JSON run configuration drives ingest,
//! split, balance, translation training, synthesis, classifier training,
//! evaluation, comparison, and embedding, with digest-keyed stage caching.

pub mod config;
pub mod stages;

pub use config::{EmbeddingSection, GanSection, RunConfig, CONFIG_VERSION};
pub use stages::{run_pipeline, RunSummary};

/// Per-stage seed offsets. Every stage seed is `global_seed + offset`, so a
/// single config seed pins the whole run.
pub mod seeds {
    pub const SPLIT: u64 = 1;
    pub const UNDERSAMPLE: u64 = 2;
    pub const GAN_PRIMARY: u64 = 3;
    pub const GAN_SECONDARY: u64 = 4;
    /// Classifier `k` uses `CLASSIFIER_BASE + k`.
    pub const CLASSIFIER_BASE: u64 = 10;
    pub const EMBED: u64 = 100;
}

use crate::error::{Error, Result};

/// The only supported compute device. `RUN_DEVICE` may be unset or `cpu`;
/// anything else is a validation error.
pub fn check_device() -> Result<()> {
    match std::env::var("RUN_DEVICE") {
        Err(_) => Ok(()),
        Ok(v) if v == "cpu" => Ok(()),
        Ok(other) => Err(Error::Config(format!(
            "RUN_DEVICE={other} is not supported; this build runs on cpu only"
        ))),
    }
}
