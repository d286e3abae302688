//! Deterministic train/test splitting at patient granularity.

use super::{DatasetManifest, SplitSpec, SplitUnit};
use crate::error::{Error, Result};
use crate::nn::init::shuffle;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

/// Split a manifest into train/test with no patient appearing on both sides.
///
/// Groups records by patient id (or by image when the unit is image level, or
/// when any record lacks a patient id - the fallback emits a warning on
/// stderr), shuffles groups with the split seed, and assigns
/// `round(train_fraction x groups)` groups (ties toward train) to the
/// training side.
pub fn patient_level_split(
    manifest: &DatasetManifest,
    spec: &SplitSpec,
) -> Result<(DatasetManifest, DatasetManifest)> {
    spec.validate()?;

    let by_patient = match spec.unit {
        SplitUnit::Patient => {
            if manifest.all_have_patient_ids() {
                true
            } else {
                eprintln!(
                    "warning: manifest `{}` has records without patient ids; \
                     falling back to image-level split",
                    manifest.task_name
                );
                false
            }
        }
        SplitUnit::Image => false,
    };

    // Group keys in sorted order so the shuffle is a pure function of the seed.
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (idx, record) in manifest.records.iter().enumerate() {
        let key = if by_patient {
            record.patient_id.clone().expect("checked above")
        } else {
            record.sample_id.clone()
        };
        groups.entry(key).or_default().push(idx);
    }

    if groups.len() < 2 {
        return Err(Error::CannotSplit(format!(
            "need at least two {} groups, got {}",
            if by_patient { "patient" } else { "image" },
            groups.len()
        )));
    }

    let mut keys: Vec<&String> = groups.keys().collect();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    shuffle(&mut keys, &mut rng);

    // Round to nearest; the +0.5 floor sends exact halves toward train.
    let n_train = ((spec.train_fraction * keys.len() as f64) + 0.5).floor() as usize;
    let n_train = n_train.clamp(1, keys.len() - 1);

    let mut train_records = Vec::new();
    let mut test_records = Vec::new();
    for (pos, key) in keys.iter().enumerate() {
        let bucket = if pos < n_train {
            &mut train_records
        } else {
            &mut test_records
        };
        for &idx in &groups[*key] {
            bucket.push(manifest.records[idx].clone());
        }
    }

    let train = DatasetManifest::new(manifest.task_name.clone(), train_records)?;
    let test = DatasetManifest::new(manifest.task_name.clone(), test_records)?;
    Ok((train, test))
}
