//! Translation-model checkpointing: a single versioned archive holding the
//! four parameter sets, the hyperparameters, the step count, and the loss
//! history, plus a CSV export of the loss history.

use super::build::{build_discriminator, build_generator};
use super::{DiscriminatorSpec, GanHyperparams, GanLossBundle, GeneratorSpec, TranslationModel};
use crate::error::{Error, Result};
use crate::io::container::Container;
use crate::io::csv::{fmt_f64, CsvTable};
use crate::io::sha256_hex;
use crate::nn::{export_buffers, export_params, import_state};
use crate::Real;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    format: String,
    gen_spec: GeneratorSpec,
    disc_spec: DiscriminatorSpec,
    hyperparams: GanHyperparams,
    step_count: usize,
    loss_history: Vec<GanLossBundle>,
}

const FORMAT: &str = "translation-model";

fn to_container(model: &mut TranslationModel<Real>) -> Container {
    let meta = CheckpointMeta {
        format: FORMAT.into(),
        gen_spec: model.g_a_to_b.spec,
        disc_spec: model.d_a.spec,
        hyperparams: model.hyperparams,
        step_count: model.step_count,
        loss_history: model.loss_history.clone(),
    };
    let mut container = Container::new(serde_json::to_string(&meta).expect("meta serialization"));
    let mut add = |prefix: &str, params: Vec<(String, ndarray::ArrayD<f64>)>| {
        for (name, tensor) in params {
            container.tensors.push((format!("{prefix}{name}"), tensor));
        }
    };
    add("g_a_to_b.", export_params(&mut model.g_a_to_b));
    add("g_a_to_b.", export_buffers(&mut model.g_a_to_b));
    add("g_b_to_a.", export_params(&mut model.g_b_to_a));
    add("g_b_to_a.", export_buffers(&mut model.g_b_to_a));
    add("d_a.", export_params(&mut model.d_a));
    add("d_a.", export_buffers(&mut model.d_a));
    add("d_b.", export_params(&mut model.d_b));
    add("d_b.", export_buffers(&mut model.d_b));
    container
}

pub fn save_model(model: &mut TranslationModel<Real>, path: &Path) -> Result<()> {
    to_container(model).save(path)
}

/// Deterministic content digest of the model (over the checkpoint bytes).
pub fn model_digest(model: &mut TranslationModel<Real>) -> String {
    sha256_hex(&to_container(model).to_bytes())
}

pub fn load_model(path: &Path) -> Result<TranslationModel<Real>> {
    let container = Container::load(path)?;
    let meta: CheckpointMeta = serde_json::from_str(&container.meta_json)
        .map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
    if meta.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "expected a {FORMAT} archive, found `{}`",
            meta.format
        )));
    }
    let mut model = TranslationModel {
        g_a_to_b: build_generator(&meta.gen_spec, 0)?,
        g_b_to_a: build_generator(&meta.gen_spec, 0)?,
        d_a: build_discriminator(&meta.disc_spec, 0)?,
        d_b: build_discriminator(&meta.disc_spec, 0)?,
        hyperparams: meta.hyperparams,
        step_count: meta.step_count,
        loss_history: meta.loss_history,
    };
    // Parameters and buffers live in one flat namespace per network;
    // import_state resolves each kind by name.
    let strip = |prefix: &str| -> Vec<(String, ndarray::ArrayD<f64>)> {
        container
            .tensors
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(n, t)| (n[prefix.len()..].to_string(), t.clone()))
            .collect()
    };
    let pa = strip("g_a_to_b.");
    import_state(&mut model.g_a_to_b, &pa, &pa)?;
    let pb = strip("g_b_to_a.");
    import_state(&mut model.g_b_to_a, &pb, &pb)?;
    let pda = strip("d_a.");
    import_state(&mut model.d_a, &pda, &pda)?;
    let pdb = strip("d_b.");
    import_state(&mut model.d_b, &pdb, &pdb)?;
    Ok(model)
}

/// Loss history as `step, adv_AtoB, adv_BtoA, cycle, total`.
pub fn loss_history_csv(history: &[GanLossBundle]) -> CsvTable {
    let mut table = CsvTable::new(&["step", "adv_AtoB", "adv_BtoA", "cycle", "total"]);
    for bundle in history {
        table.push_row(vec![
            bundle.step.to_string(),
            fmt_f64(bundle.adv_a_to_b),
            fmt_f64(bundle.adv_b_to_a),
            fmt_f64(bundle.cycle),
            fmt_f64(bundle.total),
        ]);
    }
    table
}
