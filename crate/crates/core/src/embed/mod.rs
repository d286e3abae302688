//! Feature extraction and deterministic 2-D manifold embeddings for visual
//! separability analysis.

pub mod features;
pub mod plot;
pub mod umap;

pub use features::{extract_features, FeatureSource};
pub use plot::export_embedding_plot;
pub use umap::{compute_embedding, UmapParams};

use serde::{Deserialize, Serialize};

/// Parameters of one embedding run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmapParamsRecord {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub seed: u64,
}

/// Tag carried per embedded point (class + provenance, e.g.
/// `negative/real`, `positive/synthetic`).
pub type PointTag = String;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingResult {
    /// `N x 2` coordinates, one row per input sample, canonical (sorted by
    /// sample id) order.
    pub coordinates: Vec<[f64; 2]>,
    pub sample_ids: Vec<String>,
    pub labels: Vec<PointTag>,
    pub params: UmapParamsRecord,
    pub feature_source: FeatureSource,
}

impl EmbeddingResult {
    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }
}
