//! Stage orchestration. Stages run in dependency order; each writes its
//! outputs plus a marker file keyed by the digests of its inputs, and a rerun
//! with matching keys skips the work. Every artifact is listed in
//! `run_manifest.json` at completion. Stage seeds derive from the global seed
//! via the offsets in [`crate::pipeline::seeds`]; per-stage seed fields in
//! the config are overridden by that derivation.

use super::config::{GanSection, RunConfig};
use super::seeds;
use crate::classifier::train::{
    load_classifier, save_classifier, train_classifier, TrainedClassifier,
};
use crate::classifier::assemble_training_set;
use crate::data::{
    compute_skew, ingest_directory, patient_level_split, undersample_majority, DatasetManifest,
    Label, LabelRule, Provenance, SkewReport, SplitSpec,
};
use crate::embed::umap::UmapParams;
use crate::embed::{compute_embedding, export_embedding_plot, extract_features, FeatureSource};
use crate::error::{Error, Result};
use crate::eval::{comparison_report, evaluate, EvalReport};
use crate::gan::checkpoint::{load_model, loss_history_csv, save_model};
use crate::gan::train::{train_translation, TrainOptions};
use crate::gan::Direction;
use crate::io::csv::{fmt_f64, CsvTable};
use crate::io::{read_json, sha256_hex, write_json};
use crate::synthesis::{export_dataset, synthesize_minority, SyntheticSet};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Serialize)]
pub struct RunSummary {
    pub stages_run: Vec<String>,
    pub stages_skipped: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct StageMarker {
    key: String,
    outputs: Vec<PathBuf>,
}

fn marker_path(out_root: &Path, stage: &str) -> PathBuf {
    out_root.join("stages").join(format!("{stage}.json"))
}

/// Run `work` unless a marker with the same key exists and all declared
/// outputs are present. Errors are tagged with the stage name.
fn run_stage(
    out_root: &Path,
    summary: &mut RunSummary,
    stage: &str,
    key: String,
    outputs: Vec<PathBuf>,
    work: impl FnOnce() -> Result<()>,
) -> Result<()> {
    let marker_file = marker_path(out_root, stage);
    if let Ok(marker) = read_json::<StageMarker>(&marker_file) {
        if marker.key == key && outputs.iter().all(|p| p.exists()) {
            summary.stages_skipped.push(stage.to_string());
            summary.artifacts.extend(outputs);
            return Ok(());
        }
    }
    work().map_err(|e| Error::Stage {
        stage: stage.to_string(),
        source: Box::new(e),
    })?;
    write_json(
        &marker_file,
        &StageMarker {
            key,
            outputs: outputs.clone(),
        },
    )?;
    summary.stages_run.push(stage.to_string());
    summary.artifacts.extend(outputs);
    Ok(())
}

fn stage_key<T: Serialize>(parts: &T) -> String {
    sha256_hex(serde_json::to_string(parts).expect("key serialization").as_bytes())
}

fn label_rule(config: &RunConfig) -> LabelRule {
    LabelRule::new(vec![
        (
            config.negative_dir.clone(),
            Label::Negative,
            Provenance::Real,
            config.negative_domain,
        ),
        (
            config.positive_dir.clone(),
            Label::Positive,
            Provenance::Real,
            config.positive_domain,
        ),
    ])
}

/// Deterministically subsample a manifest down to `max` records (seeded
/// shuffle, then re-sorted).
fn subsample(manifest: &DatasetManifest, max: usize, seed: u64) -> Result<DatasetManifest> {
    if manifest.len() <= max {
        return Ok(manifest.clone());
    }
    use rand::SeedableRng;
    let mut indices: Vec<usize> = (0..manifest.len()).collect();
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    crate::nn::init::shuffle(&mut indices, &mut rng);
    indices.truncate(max);
    let records = indices
        .into_iter()
        .map(|i| manifest.records[i].clone())
        .collect();
    DatasetManifest::new(manifest.task_name.clone(), records)
}

fn train_gan_stage(
    out_root: &Path,
    summary: &mut RunSummary,
    stage: &str,
    section: &GanSection,
    seed: u64,
    gan_a: &DatasetManifest,
    gan_b: &DatasetManifest,
    data_root: &Path,
    image_size: usize,
) -> Result<PathBuf> {
    let dir = out_root.join(stage);
    let ckpt = dir.join("model.ckpt");
    let csv = dir.join("loss_history.csv");
    let mut hp = section.hyperparams;
    hp.seed = seed;
    let key = stage_key(&(
        &gan_a.content_digest,
        &gan_b.content_digest,
        &section.generator,
        &section.discriminator,
        &hp,
        image_size,
    ));
    let outputs = vec![ckpt.clone(), csv.clone()];
    run_stage(out_root, summary, stage, key, outputs, || {
        let opts = TrainOptions {
            image_size,
            checkpoint_every: None,
            checkpoint_dir: Some(dir.clone()),
            log_every: 200,
        };
        let mut model = train_translation(
            gan_a,
            data_root,
            gan_b,
            data_root,
            &section.generator,
            &section.discriminator,
            &hp,
            &opts,
        )?;
        save_model(&mut model, &ckpt)?;
        loss_history_csv(&model.loss_history).write(&csv)?;
        Ok(())
    })?;
    Ok(ckpt)
}

fn synthesize_stage(
    out_root: &Path,
    summary: &mut RunSummary,
    stage: &str,
    set_name: &str,
    ckpt: &Path,
    majority: &DatasetManifest,
    config: &RunConfig,
) -> Result<PathBuf> {
    let dir = out_root.join("synthetic").join(set_name);
    let manifest_path = dir.join("manifest.jsonl");
    let ckpt_bytes_digest = sha256_hex(&std::fs::read(ckpt).map_err(|e| Error::io(ckpt, e))?);
    let key = stage_key(&(
        &ckpt_bytes_digest,
        &majority.content_digest,
        config.image_size,
        set_name,
    ));
    let outputs = vec![manifest_path.clone(), dir.join("provenance.json")];
    run_stage(out_root, summary, stage, key, outputs, || {
        let mut model = load_model(ckpt)?;
        let set = synthesize_minority(
            &mut model,
            majority,
            &config.data_root,
            Direction::AToB,
            set_name,
            config.positive_domain,
            config.image_size,
        )?;
        export_dataset(&set, &dir, Some(&model.hyperparams))
    })?;
    Ok(dir)
}

/// Execute the full pipeline for a validated config. Partial outputs are
/// preserved on failure and the failing stage is named in the error.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    super::check_device()?;
    config.validate()?;
    let out = config.output_root.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let g = config.seed;
    let mut summary = RunSummary::default();

    // ---- ingest ----
    let full_path = out.join("manifests").join("full.jsonl");
    let rule = label_rule(config);
    let outcome = ingest_directory(&config.data_root, &config.task_name, &rule)
        .map_err(|e| Error::Stage {
            stage: "ingest".into(),
            source: Box::new(e),
        })?;
    if !outcome.failures.is_empty() {
        eprintln!(
            "warning: {} file(s) failed to decode during ingest",
            outcome.failures.len()
        );
    }
    let full = outcome.manifest;
    let unchanged = DatasetManifest::load(&config.task_name, &full_path)
        .map(|m| m.content_digest == full.content_digest)
        .unwrap_or(false);
    if unchanged {
        summary.stages_skipped.push("ingest".into());
    } else {
        full.save(&full_path)?;
        summary.stages_run.push("ingest".into());
    }
    summary.artifacts.push(full_path.clone());

    // ---- split ----
    let train_path = out.join("manifests").join("train.jsonl");
    let test_path = out.join("manifests").join("test.jsonl");
    let skew_path = out.join("manifests").join("train_skew.json");
    let split_spec = SplitSpec {
        train_fraction: config.train_fraction,
        seed: g + seeds::SPLIT,
        unit: config.split_unit,
    };
    let key = stage_key(&(&full.content_digest, &split_spec));
    run_stage(
        &out,
        &mut summary,
        "split",
        key,
        vec![train_path.clone(), test_path.clone(), skew_path.clone()],
        || {
            let (train, test) = patient_level_split(&full, &split_spec)?;
            let skew = compute_skew(&train)?;
            train.save(&train_path)?;
            test.save(&test_path)?;
            write_json(&skew_path, &skew)?;
            Ok(())
        },
    )?;
    let train = DatasetManifest::load(&config.task_name, &train_path)?;
    let test = DatasetManifest::load(&config.task_name, &test_path)?;

    // ---- balance (undersample the majority for translation training) ----
    let gan_a_path = out.join("manifests").join("gan_domain_a.jsonl");
    let gan_b_path = out.join("manifests").join("gan_domain_b.jsonl");
    let undersample_seed = g + seeds::UNDERSAMPLE;
    let key = stage_key(&(&train.content_digest, undersample_seed));
    run_stage(
        &out,
        &mut summary,
        "balance",
        key,
        vec![gan_a_path.clone(), gan_b_path.clone()],
        || {
            let negatives = train.count_label(Label::Negative);
            let positives = train.count_label(Label::Positive);
            let target = negatives.min(positives);
            let balanced = undersample_majority(&train, target, undersample_seed)?;
            balanced.filter_by_label(Label::Negative)?.save(&gan_a_path)?;
            balanced.filter_by_label(Label::Positive)?.save(&gan_b_path)?;
            Ok(())
        },
    )?;
    let gan_a = DatasetManifest::load(&config.task_name, &gan_a_path)?;
    let gan_b = DatasetManifest::load(&config.task_name, &gan_b_path)?;

    // ---- translation training + synthesis ----
    let ckpt1 = train_gan_stage(
        &out,
        &mut summary,
        "train-gan",
        &config.gan,
        g + seeds::GAN_PRIMARY,
        &gan_a,
        &gan_b,
        &config.data_root,
        config.image_size,
    )?;
    let train_majority = train.filter_by_label(Label::Negative)?;
    let g1_dir = synthesize_stage(
        &out,
        &mut summary,
        "synthesize-g1",
        "g1",
        &ckpt1,
        &train_majority,
        config,
    )?;
    let g1_manifest = DatasetManifest::load(&config.task_name, &g1_dir.join("manifest.jsonl"))?;

    let g2 = match &config.second_gan {
        Some(section) => {
            let ckpt2 = train_gan_stage(
                &out,
                &mut summary,
                "train-gan2",
                section,
                g + seeds::GAN_SECONDARY,
                &gan_a,
                &gan_b,
                &config.data_root,
                config.image_size,
            )?;
            let g2_dir = synthesize_stage(
                &out,
                &mut summary,
                "synthesize-g2",
                "g2",
                &ckpt2,
                &train_majority,
                config,
            )?;
            Some((
                g2_dir.clone(),
                DatasetManifest::load(&config.task_name, &g2_dir.join("manifest.jsonl"))?,
            ))
        }
        None => None,
    };

    // Manifests that mix roots get absolute paths before merging.
    let train_abs = train.with_root(&config.data_root)?;
    let test_abs = test.with_root(&config.data_root)?;
    let g1_set = SyntheticSet {
        name: "g1".into(),
        source_task: config.task_name.clone(),
        model_digest: String::new(),
        manifest: g1_manifest.with_root(&g1_dir)?,
        images: Vec::new(),
    };
    let g2_set = match &g2 {
        Some((dir, manifest)) => Some(SyntheticSet {
            name: "g2".into(),
            source_task: config.task_name.clone(),
            model_digest: String::new(),
            manifest: manifest.with_root(dir)?,
            images: Vec::new(),
        }),
        None => None,
    };

    // ---- classifier runs ----
    let empty_root = PathBuf::new();
    let mut metrics_paths = Vec::new();
    for (k, base_cfg) in config.classifiers.iter().enumerate() {
        let mut cfg = base_cfg.clone();
        cfg.seed = g + seeds::CLASSIFIER_BASE + k as u64;
        let run_dir = out.join("runs").join(&cfg.name);
        let stage = format!("train-clf-{}", cfg.name);
        let assembled_path = run_dir.join("train_manifest.jsonl");
        let metrics_path = run_dir.join("metrics.json");
        let key = stage_key(&(
            &train_abs.content_digest,
            &g1_set.manifest.content_digest,
            g2_set.as_ref().map(|s| s.manifest.content_digest.clone()),
            &cfg,
            &test_abs.content_digest,
            config.image_size,
            config.threshold,
        ));
        let outputs = vec![
            assembled_path.clone(),
            run_dir.join("config.json"),
            run_dir.join("curve.csv"),
            run_dir.join("checkpoint.ckpt"),
            metrics_path.clone(),
            run_dir.join("confidences.csv"),
            run_dir.join("skew.json"),
        ];
        run_stage(&out, &mut summary, &stage, key, outputs, || {
            let assembled =
                assemble_training_set(&train_abs, Some(&g1_set), g2_set.as_ref(), &cfg)?;
            assembled.save(&assembled_path)?;
            write_json(&run_dir.join("skew.json"), &compute_skew(&assembled)?)?;
            write_json(&run_dir.join("config.json"), &cfg)?;
            let mut model = train_classifier(
                &cfg,
                &assembled,
                &empty_root,
                config.image_size,
                Some(&run_dir),
            )?;
            let mut curve = CsvTable::new(&["epoch", "loss"]);
            for (i, loss) in model.curve.iter().enumerate() {
                curve.push_row(vec![(i + 1).to_string(), fmt_f64(*loss)]);
            }
            curve.write(&run_dir.join("curve.csv"))?;
            save_classifier(&mut model, &run_dir.join("checkpoint.ckpt"))?;
            let report = evaluate(
                &mut model,
                &test_abs,
                &empty_root,
                config.image_size,
                config.threshold,
            )?;
            write_json(&metrics_path, &report)?;
            let mut confidences = CsvTable::new(&["sample_id", "probability"]);
            for (id, p) in &report.confidences {
                confidences.push_row(vec![id.clone(), fmt_f64(*p)]);
            }
            confidences.write(&run_dir.join("confidences.csv"))?;
            Ok(())
        })?;
        metrics_paths.push((cfg.name.clone(), metrics_path, run_dir));
    }

    // ---- comparison ----
    let comparison_csv = out.join("comparison").join("comparison.csv");
    let comparison_txt = out.join("comparison").join("comparison.txt");
    let mut reports: Vec<EvalReport> = Vec::new();
    let mut skews: Vec<SkewReport> = Vec::new();
    for (_, metrics_path, run_dir) in &metrics_paths {
        reports.push(read_json(metrics_path)?);
        skews.push(read_json(&run_dir.join("skew.json"))?);
    }
    let key = stage_key(&reports.iter().map(|r| (&r.config_id, r.sensitivity)).collect::<Vec<_>>());
    run_stage(
        &out,
        &mut summary,
        "compare",
        key,
        vec![comparison_csv.clone(), comparison_txt.clone()],
        || {
            let cmp = comparison_report(&reports, &skews)?;
            cmp.csv.write(&comparison_csv)?;
            std::fs::write(&comparison_txt, &cmp.text)
                .map_err(|e| Error::io(&comparison_txt, e))?;
            Ok(())
        },
    )?;

    // ---- embedding ----
    let embed_base = out.join("embedding").join("embedding");
    let embed_csv = embed_base.with_extension("csv");
    let embed_png = embed_base.with_extension("png");
    let mut union_parts: Vec<&DatasetManifest> = vec![&train_abs, &g1_set.manifest];
    if let Some(set) = &g2_set {
        union_parts.push(&set.manifest);
    }
    let union = crate::data::merge_manifests(&union_parts)?;
    let embed_seed = g + seeds::EMBED;
    let embed_manifest = subsample(&union, config.embedding.max_points, embed_seed)?;
    let classifier_name = config
        .embedding
        .classifier
        .clone()
        .unwrap_or_else(|| config.classifiers[0].name.clone());
    let key = stage_key(&(
        &embed_manifest.content_digest,
        config.embedding.n_neighbors,
        config.embedding.min_dist,
        config.embedding.n_epochs,
        &config.embedding.source,
        &classifier_name,
        embed_seed,
    ));
    run_stage(
        &out,
        &mut summary,
        "embed",
        key,
        vec![embed_csv.clone(), embed_png.clone()],
        || {
            let mut model: Option<TrainedClassifier> = None;
            if config.embedding.source == FeatureSource::ClassifierFeatures {
                let ckpt = out
                    .join("runs")
                    .join(&classifier_name)
                    .join("checkpoint.ckpt");
                model = Some(load_classifier(&ckpt)?);
            }
            let features = extract_features(
                &embed_manifest,
                &empty_root,
                config.embedding.source,
                model.as_mut(),
                config.image_size,
            )?;
            let ids: Vec<String> = embed_manifest
                .records
                .iter()
                .map(|r| r.sample_id.clone())
                .collect();
            let labels: Vec<String> = embed_manifest
                .records
                .iter()
                .map(|r| format!("{}/{}", r.label, r.provenance))
                .collect();
            let params = UmapParams {
                n_neighbors: config.embedding.n_neighbors,
                min_dist: config.embedding.min_dist,
                n_epochs: config.embedding.n_epochs,
                seed: embed_seed,
                ..UmapParams::default()
            };
            let mut result = compute_embedding(&features, ids, labels, &params)?;
            result.feature_source = config.embedding.source;
            export_embedding_plot(&result, &embed_base)
        },
    )?;

    // ---- run manifest ----
    let run_manifest_path = out.join("run_manifest.json");
    write_json(&run_manifest_path, &summary)?;
    summary.artifacts.push(run_manifest_path);
    Ok(summary)
}
