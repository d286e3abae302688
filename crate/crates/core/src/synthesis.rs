//! Bulk synthesis: apply a trained translation model to every majority-class
//! training image, producing a provenance-tagged synthetic minority dataset,
//! and export it as an image tree plus manifest.

use crate::data::{
    load_sample, preprocess_to, DatasetManifest, Label, ManifestRecord, Provenance, SourceDomain,
};
use crate::error::{Error, Result};
use crate::gan::checkpoint::model_digest;
use crate::gan::train::{to_signed_tensor, to_unit_pixels};
use crate::gan::{Direction, GanHyperparams, TranslationModel};
use crate::nn::Layer;
use crate::Real;
use ndarray::Array3;
use serde::Serialize;
use std::path::Path;

/// A generated minority-class dataset. Every record is synthetic-provenance,
/// positive-labeled, and traceable to its source sample id through the id
/// suffix scheme `<source_id>__synth_<task>`.
pub struct SyntheticSet {
    pub name: String,
    pub source_task: String,
    pub model_digest: String,
    pub manifest: DatasetManifest,
    /// Pixels parallel to `manifest.records` (sorted by sample id).
    pub images: Vec<Array3<Real>>,
}

/// Translate every record of the majority manifest. One synthetic image per
/// majority image; deterministic for a fixed model.
pub fn synthesize_minority(
    model: &mut TranslationModel<Real>,
    majority: &DatasetManifest,
    majority_root: &Path,
    direction: Direction,
    set_name: &str,
    target_domain: SourceDomain,
    image_size: usize,
) -> Result<SyntheticSet> {
    if image_size % 4 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "model downsamples twice; image size {image_size} is not divisible by 4"
        )));
    }
    let digest = model_digest(model);
    let mut pairs: Vec<(ManifestRecord, Array3<Real>)> = Vec::with_capacity(majority.len());
    for record in &majority.records {
        let sample = load_sample(majority_root, record)?;
        let sample = preprocess_to(&sample, image_size)?;
        let tensor = to_signed_tensor(&sample.pixels);
        let gen = match direction {
            Direction::AToB => &mut model.g_a_to_b,
            Direction::BToA => &mut model.g_b_to_a,
        };
        if tensor.dim().1 != gen.spec.input_channels {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} channels, image has {}",
                gen.spec.input_channels,
                tensor.dim().1
            )));
        }
        let out = gen.forward(&tensor, false);
        let pixels = to_unit_pixels(&out, 0);
        let synth_id = format!("{}__synth_{}", record.sample_id, set_name);
        pairs.push((
            ManifestRecord {
                path: format!("images/{synth_id}.png"),
                sample_id: synth_id,
                // No patient linkage: generated samples are not attributable
                // to an individual.
                patient_id: None,
                label: Label::Positive,
                provenance: Provenance::Synthetic,
                source_domain: target_domain,
            },
            pixels,
        ));
    }
    pairs.sort_by(|a, b| a.0.sample_id.cmp(&b.0.sample_id));
    let (records, images): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let manifest = DatasetManifest::new(majority.task_name.clone(), records)?;
    Ok(SyntheticSet {
        name: set_name.to_string(),
        source_task: majority.task_name.clone(),
        model_digest: digest,
        manifest,
        images,
    })
}

#[derive(Serialize)]
struct ProvenanceInfo<'a> {
    name: &'a str,
    source_task: &'a str,
    model_digest: &'a str,
    count: usize,
    hyperparams: Option<&'a GanHyperparams>,
}

/// Write the set as `images/*.png` (8-bit grayscale, round-half-up
/// quantization), `manifest.jsonl`, and `provenance.json`. On failure the
/// partially written tree is removed.
pub fn export_dataset(
    set: &SyntheticSet,
    out_dir: &Path,
    hyperparams: Option<&GanHyperparams>,
) -> Result<()> {
    let result = export_inner(set, out_dir, hyperparams);
    if result.is_err() {
        let _ = std::fs::remove_dir_all(out_dir);
    }
    result
}

fn export_inner(
    set: &SyntheticSet,
    out_dir: &Path,
    hyperparams: Option<&GanHyperparams>,
) -> Result<()> {
    let images_dir = out_dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    for (record, pixels) in set.manifest.records.iter().zip(&set.images) {
        let path = out_dir.join(&record.path);
        write_png_gray(&path, pixels)?;
    }
    set.manifest.save(&out_dir.join("manifest.jsonl"))?;
    crate::io::write_json(
        &out_dir.join("provenance.json"),
        &ProvenanceInfo {
            name: &set.name,
            source_task: &set.source_task,
            model_digest: &set.model_digest,
            count: set.manifest.len(),
            hyperparams,
        },
    )?;
    Ok(())
}

/// 8-bit grayscale PNG with round-half-up quantization: 1.0 -> 255, 0.0 -> 0.
pub fn write_png_gray(path: &Path, pixels: &Array3<Real>) -> Result<()> {
    let (h, w, c) = pixels.dim();
    if c != 1 {
        return Err(Error::ShapeMismatch(format!(
            "png export expects single-channel pixels, got {c}"
        )));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut img = image::GrayImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let q = (pixels[[y, x, 0]].clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8;
            img.put_pixel(x as u32, y as u32, image::Luma([q]));
        }
    }
    img.save(path).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })
}
