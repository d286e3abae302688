//! Manifest-level operations: skew accounting, majority undersampling,
//! merging, and provenance filtering.

use super::{DatasetManifest, Label, Provenance, SkewReport};
use crate::error::{Error, Result};
use crate::nn::init::shuffle;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// `skew = negatives / positives`. Errors when there are no positives.
pub fn compute_skew(manifest: &DatasetManifest) -> Result<SkewReport> {
    let negatives = manifest.count_label(Label::Negative);
    let positives = manifest.count_label(Label::Positive);
    if positives == 0 {
        return Err(Error::UndefinedSkew);
    }
    Ok(SkewReport {
        negatives,
        positives,
        skew: negatives as f64 / positives as f64,
    })
}

/// Keep exactly `target_count` majority-class records, sampled uniformly
/// without replacement with the given seed; minority records pass through
/// untouched.
pub fn undersample_majority(
    manifest: &DatasetManifest,
    target_count: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    let negatives = manifest.count_label(Label::Negative);
    let positives = manifest.count_label(Label::Positive);
    let majority_label = if negatives >= positives {
        Label::Negative
    } else {
        Label::Positive
    };
    let available = manifest.count_label(majority_label);
    if target_count > available {
        return Err(Error::TargetExceedsAvailable {
            target: target_count,
            available,
        });
    }

    // Records are already sorted by sample_id, so index shuffling is a pure
    // function of the seed.
    let majority_indices: Vec<usize> = manifest
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label == majority_label)
        .map(|(i, _)| i)
        .collect();
    let mut picked = majority_indices.clone();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    shuffle(&mut picked, &mut rng);
    picked.truncate(target_count);
    picked.sort_unstable();

    let mut records = Vec::with_capacity(manifest.len() - (available - target_count));
    let mut picked_iter = picked.iter().peekable();
    for (i, record) in manifest.records.iter().enumerate() {
        if record.label == majority_label {
            if picked_iter.peek() == Some(&&i) {
                picked_iter.next();
                records.push(record.clone());
            }
        } else {
            records.push(record.clone());
        }
    }
    DatasetManifest::new(manifest.task_name.clone(), records)
}

/// Concatenate manifests with disjoint sample ids; the digest is recomputed.
/// The merged manifest takes the first part's task name.
pub fn merge_manifests(parts: &[&DatasetManifest]) -> Result<DatasetManifest> {
    let task_name = parts
        .first()
        .map(|m| m.task_name.clone())
        .unwrap_or_default();
    let mut records = Vec::new();
    for part in parts {
        records.extend(part.records.iter().cloned());
    }
    // DatasetManifest::new rejects duplicates, naming the collision.
    DatasetManifest::new(task_name, records)
}

/// Records with the given provenance, as a fresh manifest.
pub fn filter_by_provenance(
    manifest: &DatasetManifest,
    provenance: Provenance,
) -> Result<DatasetManifest> {
    let records = manifest
        .records
        .iter()
        .filter(|r| r.provenance == provenance)
        .cloned()
        .collect();
    DatasetManifest::new(manifest.task_name.clone(), records)
}
