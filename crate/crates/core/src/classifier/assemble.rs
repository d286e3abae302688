//! Training-set composition. Negatives are always the real negatives;
//! positives come from the config flags: real positives, the first synthetic
//! set, the second synthetic set, in any combination (at least one). The
//! only-synthetic configuration drops real positives but keeps real
//! negatives.

use super::TrainingConfig;
use crate::data::{merge_manifests, DatasetManifest, Label};
use crate::error::{Error, Result};
use crate::synthesis::SyntheticSet;

pub fn assemble_training_set(
    real: &DatasetManifest,
    g1: Option<&SyntheticSet>,
    g2: Option<&SyntheticSet>,
    config: &TrainingConfig,
) -> Result<DatasetManifest> {
    config.validate()?;
    if config.include_g1 && g1.is_none() {
        return Err(Error::Config(
            "config includes the first synthetic set but none was provided".into(),
        ));
    }
    if config.include_g2 && g2.is_none() {
        return Err(Error::Config(
            "config includes the second synthetic set but none was provided".into(),
        ));
    }

    let mut records = Vec::new();
    for record in &real.records {
        match record.label {
            Label::Negative => records.push(record.clone()),
            Label::Positive => {
                if config.include_real {
                    records.push(record.clone());
                }
            }
        }
    }
    let base = DatasetManifest::new(real.task_name.clone(), records)?;
    let mut parts: Vec<&DatasetManifest> = vec![&base];
    if config.include_g1 {
        parts.push(&g1.unwrap().manifest);
    }
    if config.include_g2 {
        parts.push(&g2.unwrap().manifest);
    }
    merge_manifests(&parts)
}
