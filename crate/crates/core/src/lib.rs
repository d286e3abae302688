//! Toolkit for rebalancing skewed binary image-classification datasets by
//! learning an unpaired translation between the over-represented class and the
//! under-represented one, bulk-synthesizing minority-class images, and
//! benchmarking the effect on classifier sensitivity under a fixed held-out
//! evaluation protocol.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`data`] - manifests, ingestion, patient-level splitting, skew accounting,
//!   preprocessing, undersampling.
//! - [`nn`] - a small deterministic CPU neural-network stack (conv layers,
//!   normalization, pooling, optimizers) shared by the translation engine and
//!   the classifier bench.
//! - [`gan`] - the two-generator/two-discriminator translation engine: losses,
//!   alternating minimax training, checkpointing.
//! - [`synthesis`] - bulk generation and export of provenance-tagged synthetic
//!   minority images.
//! - [`classifier`] - transfer-style classifiers (backbone + global average
//!   pooling + two-unit softmax head) and the training-set configurations.
//! - [`eval`] - fixed-test-set evaluation: confusion counts, sensitivity,
//!   confidence scores, comparison tables.
//! - [`embed`] - feature extraction and deterministic 2-D manifold embeddings.
//! - [`pipeline`] - declarative run configuration and stage orchestration.
//!
//! All numeric kernels are generic over the scalar type via [`Scalar`]
//! (`f32` for training speed, `f64` for gradient verification); the concrete
//! aliases [`Real`] and [`Precise`] are used at module boundaries.

pub mod scalar;
pub mod error;
pub mod io;
pub mod nn;
pub mod data;
pub mod gan;
pub mod synthesis;
pub mod classifier;
pub mod eval;
pub mod embed;
pub mod toy;
pub mod pipeline;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar for training and inference.
pub type Real = f32;
/// High-precision scalar for gradient verification and oracles.
pub type Precise = f64;
