//! Dataset ingestion, manifest bookkeeping, patient-level splitting, skew
//! accounting, preprocessing, and majority-class undersampling.
//!
//! A [`DatasetManifest`] is an immutable, sorted, digest-stamped list of image
//! records; every pipeline stage consumes and produces manifests rather than
//! loose files. All operations here are pure functions of their inputs plus a
//! seed and are safe to call from multiple threads.

pub mod ingest;
pub mod loader;
pub mod manifest_ops;
pub mod preprocess;
pub mod split;

pub use ingest::{ingest_directory, IngestOutcome, LabelRule};
pub use loader::{load_image_pixels, load_sample};
pub use manifest_ops::{compute_skew, filter_by_provenance, merge_manifests, undersample_majority};
pub use preprocess::{preprocess, preprocess_to, PREPROCESS_SIZE};
pub use split::patient_level_split;

use crate::error::{Error, Result};
use crate::io::sha256_hex;
use crate::Real;
use ndarray::Array3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceDomain {
    Normal,
    Pneumonia,
    Covid,
    ToyA,
    ToyB,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Negative => write!(f, "negative"),
            Label::Positive => write!(f, "positive"),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Real => write!(f, "real"),
            Provenance::Synthetic => write!(f, "synthetic"),
        }
    }
}

/// One decoded image plus its bookkeeping tags. Pixels are `H x W x C` reals
/// in `[0, 1]`; after preprocessing `H = W` equals the configured input size
/// and `C = 1`.
#[derive(Debug, Clone)]
pub struct ImageSample {
    pub sample_id: String,
    pub patient_id: Option<String>,
    pub pixels: Array3<Real>,
    pub label: Label,
    pub provenance: Provenance,
    pub source_domain: SourceDomain,
}

impl ImageSample {
    pub fn new(
        sample_id: impl Into<String>,
        patient_id: Option<String>,
        pixels: Array3<Real>,
        label: Label,
        provenance: Provenance,
        source_domain: SourceDomain,
    ) -> Result<Self> {
        if provenance == Provenance::Synthetic && label != Label::Positive {
            return Err(Error::InvalidSpec(
                "synthetic provenance requires a positive label".into(),
            ));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidSpec("pixel values outside [0, 1]".into()));
        }
        Ok(ImageSample {
            sample_id: sample_id.into(),
            patient_id,
            pixels,
            label,
            provenance,
            source_domain,
        })
    }
}

/// One line of a manifest. Serialized as JSON lines, sorted by `sample_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub sample_id: String,
    pub patient_id: Option<String>,
    pub label: Label,
    pub provenance: Provenance,
    pub source_domain: SourceDomain,
}

/// Ordered, digest-stamped dataset description. Immutable after construction;
/// every operation returns a new manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task_name: String,
    pub records: Vec<ManifestRecord>,
    pub content_digest: String,
}

impl DatasetManifest {
    /// Sorts records by `sample_id`, rejects duplicates, computes the digest.
    pub fn new(task_name: impl Into<String>, mut records: Vec<ManifestRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        let mut seen = BTreeSet::new();
        for record in &records {
            if record.provenance == Provenance::Synthetic && record.label != Label::Positive {
                return Err(Error::InvalidSpec(format!(
                    "record `{}`: synthetic provenance requires a positive label",
                    record.sample_id
                )));
            }
            if !seen.insert(record.sample_id.clone()) {
                return Err(Error::DuplicateSampleId(record.sample_id.clone()));
            }
        }
        let mut manifest = DatasetManifest {
            task_name: task_name.into(),
            records,
            content_digest: String::new(),
        };
        manifest.content_digest = manifest.compute_digest();
        Ok(manifest)
    }

    /// SHA-256 over the concatenated JSON lines.
    pub fn compute_digest(&self) -> String {
        sha256_hex(self.to_jsonl().as_bytes())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serialization"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(task_name: &str, text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(line)
                .map_err(|e| Error::Config(format!("bad manifest line: {e}")))?;
            records.push(record);
        }
        DatasetManifest::new(task_name, records)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(task_name: &str, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(task_name, &text)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn count_provenance(&self, provenance: Provenance) -> usize {
        self.records
            .iter()
            .filter(|r| r.provenance == provenance)
            .count()
    }

    /// Distinct patient ids; records without one count as absent.
    pub fn patient_ids(&self) -> BTreeSet<&str> {
        self.records
            .iter()
            .filter_map(|r| r.patient_id.as_deref())
            .collect()
    }

    pub fn all_have_patient_ids(&self) -> bool {
        self.records.iter().all(|r| r.patient_id.is_some())
    }

    /// Rewrite record paths as absolute paths under `root` (digest is
    /// recomputed). Used when manifests from different roots are merged.
    pub fn with_root(&self, root: &Path) -> Result<Self> {
        let records = self
            .records
            .iter()
            .map(|r| {
                let mut record = r.clone();
                record.path = root.join(&r.path).to_string_lossy().into_owned();
                record
            })
            .collect();
        DatasetManifest::new(self.task_name.clone(), records)
    }

    /// Records carrying `label`, as a fresh manifest.
    pub fn filter_by_label(&self, label: Label) -> Result<Self> {
        let records = self
            .records
            .iter()
            .filter(|r| r.label == label)
            .cloned()
            .collect();
        DatasetManifest::new(self.task_name.clone(), records)
    }
}

/// How a split is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub unit: SplitUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitUnit {
    Patient,
    Image,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
            unit: SplitUnit::Patient,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_fraction <= 0.0 || self.train_fraction >= 1.0 {
            return Err(Error::InvalidSpec(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Class-balance accounting: `skew = negatives / positives`. The counts are
/// the lossless form of the ratio; `skew` is the f64 convenience value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    pub negatives: usize,
    pub positives: usize,
    pub skew: f64,
}

impl SkewReport {
    /// The skew as an exact reduced ratio; `exact().scale(positives)`
    /// reconstructs the negative count with no rounding.
    pub fn exact(&self) -> Ratio {
        Ratio::new(self.negatives as u64, self.positives as u64)
    }
}

/// Exact reduced ratio backing the skew value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(numerator, denominator).max(1);
        Ratio {
            numerator: numerator / g,
            denominator: denominator / g,
        }
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Exact integer product `self * k`, defined whenever the denominator
    /// divides `k` (always true for `k` = the original denominator).
    pub fn scale(&self, k: u64) -> Option<u64> {
        if self.denominator != 0 && k % self.denominator == 0 {
            Some(self.numerator * (k / self.denominator))
        } else {
            None
        }
    }
}
