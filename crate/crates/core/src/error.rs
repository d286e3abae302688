//! Crate-wide error type with the exit-code classification used by the CLI:
//! validation errors (bad input, violated preconditions) map to exit code 1,
//! runtime failures to 2, and evaluation-protocol violations to 3.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- validation (exit 1) ---
    #[error("no images found under {root}")]
    NoImagesFound { root: PathBuf },
    #[error("cannot split: {0}")]
    CannotSplit(String),
    #[error("undefined skew: manifest has no positive records")]
    UndefinedSkew,
    #[error("duplicate sample_id `{0}`")]
    DuplicateSampleId(String),
    #[error("undersample target {target} exceeds available majority count {available}")]
    TargetExceedsAvailable { target: usize, available: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training set contains a single class")]
    SingleClass,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("no positives: tp + fn = 0")]
    NoPositives,
    #[error("comparison reports were evaluated on different test sets: {0}")]
    MismatchedTestDigest(String),
    #[error("too few samples: need more than {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("a trained classifier is required for this feature source")]
    MissingModel,

    // --- runtime (exit 2) ---
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("json error at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error("stage `{stage}` failed")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    // --- protocol (exit 3) ---
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// CLI exit code: 1 validation, 2 runtime, 3 protocol violation.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            ProtocolViolation(_) => 3,
            Io { .. } | Image { .. } | Json { .. } | Checkpoint(_) | NonFiniteLoss { .. } => 2,
            Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
