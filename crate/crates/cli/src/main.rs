//! One binary, one subcommand per pipeline stage, plus `run` for the whole
//! pipeline from a JSON config and `gen-toy` for the procedural demo corpus.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error, 3 evaluation
//! protocol violation.

use clap::{Parser, Subcommand, ValueEnum};
use cyclesynth_core::classifier::train::{load_classifier, save_classifier};
use cyclesynth_core::classifier::TrainingConfig;
use cyclesynth_core::data::{
    compute_skew, ingest_directory, patient_level_split, undersample_majority, DatasetManifest,
    Label, LabelRule, Provenance, SourceDomain, SplitSpec, SplitUnit,
};
use cyclesynth_core::embed::umap::UmapParams;
use cyclesynth_core::embed::{compute_embedding, export_embedding_plot, extract_features, FeatureSource};
use cyclesynth_core::error::Error;
use cyclesynth_core::eval::{comparison_report, evaluate, EvalReport};
use cyclesynth_core::gan::checkpoint::{load_model, loss_history_csv, save_model};
use cyclesynth_core::gan::train::{train_translation, TrainOptions};
use cyclesynth_core::gan::{
    AdversarialMode, Direction, DiscriminatorSpec, GanHyperparams, GeneratorSpec, OutputActivation,
};
use cyclesynth_core::io::csv::{fmt_f64, CsvTable};
use cyclesynth_core::io::{read_json, write_json};
use cyclesynth_core::pipeline::{check_device, run_pipeline, RunConfig};
use cyclesynth_core::synthesis::{export_dataset, synthesize_minority};
use cyclesynth_core::toy::{generate_toy_corpus, ToySpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cyclesynth",
    about = "Unpaired image translation for rebalancing skewed image classification datasets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Normal,
    Pneumonia,
    Covid,
    ToyA,
    ToyB,
}

impl From<DomainArg> for SourceDomain {
    fn from(v: DomainArg) -> Self {
        match v {
            DomainArg::Normal => SourceDomain::Normal,
            DomainArg::Pneumonia => SourceDomain::Pneumonia,
            DomainArg::Covid => SourceDomain::Covid,
            DomainArg::ToyA => SourceDomain::ToyA,
            DomainArg::ToyB => SourceDomain::ToyB,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Patient,
    Image,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    AToB,
    BToA,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    RawPixels,
    ClassifierFeatures,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Log,
    LeastSquares,
}

#[derive(Subcommand)]
enum Command {
    /// Build a manifest from a dataset root with class subdirectories.
    Ingest {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value = "task")]
        task: String,
        #[arg(long)]
        negative_dir: String,
        #[arg(long)]
        positive_dir: String,
        #[arg(long, value_enum, default_value = "toy-a")]
        negative_domain: DomainArg,
        #[arg(long, value_enum, default_value = "toy-b")]
        positive_domain: DomainArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Patient-level train/test split of a manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "patient")]
        unit: UnitArg,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Report the skew ratio (negatives / positives) of a manifest.
    Skew {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Keep a seeded uniform subsample of the majority class.
    Undersample {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a translation model on two balanced manifests.
    TrainGan {
        #[arg(long)]
        domain_a: PathBuf,
        #[arg(long)]
        domain_b: PathBuf,
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 256)]
        image_size: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 9)]
        blocks: usize,
        #[arg(long, default_value_t = 4)]
        disc_layers: usize,
        #[arg(long, default_value_t = 64)]
        disc_width: usize,
        #[arg(long, default_value_t = 10.0)]
        lambda: f64,
        #[arg(long, default_value_t = 2e-4)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1)]
        batch_size: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value = "least-squares")]
        mode: ModeArg,
        #[arg(long, default_value_t = 50)]
        pool: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a trained model to every majority image, exporting the
    /// synthetic set.
    Synthesize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        majority: PathBuf,
        #[arg(long)]
        root: PathBuf,
        #[arg(long, value_enum, default_value = "a-to-b")]
        direction: DirectionArg,
        #[arg(long, default_value = "g1")]
        name: String,
        #[arg(long, value_enum, default_value = "covid")]
        target_domain: DomainArg,
        #[arg(long, default_value_t = 256)]
        image_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier on an assembled manifest.
    TrainClf {
        #[arg(long)]
        train_manifest: PathBuf,
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 256)]
        image_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained classifier on a synthetic-free test manifest.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 256)]
        image_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge manifests (paths rewritten relative to per-manifest roots).
    Merge {
        #[arg(long, num_args = 1..)]
        manifests: Vec<PathBuf>,
        /// One root per manifest; record paths become absolute under it.
        #[arg(long, num_args = 1..)]
        roots: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine per-run metrics into a comparison table.
    Compare {
        /// metrics.json files, one per configuration.
        #[arg(long, num_args = 1..)]
        reports: Vec<PathBuf>,
        /// skew.json files matching the reports.
        #[arg(long, num_args = 1..)]
        skews: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract features and compute a 2-D embedding with a scatter plot.
    Embed {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        root: PathBuf,
        #[arg(long, value_enum, default_value = "raw-pixels")]
        source: SourceArg,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        n_neighbors: usize,
        #[arg(long, default_value_t = 0.1)]
        min_dist: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 256)]
        image_size: usize,
        /// Output base path (writes <out>.png and <out>.csv).
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute the full pipeline from a JSON run configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output root.
        #[arg(long)]
        output_root: Option<PathBuf>,
        /// Override the config's global seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate the procedural toy corpus (blobs vs rings).
    GenToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_a: usize,
        #[arg(long, default_value_t = 200)]
        n_b: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    // Usage errors are validation errors (exit 1); --help/--version exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> cyclesynth_core::Result<()> {
    check_device()?;
    match command {
        Command::Ingest {
            root,
            task,
            negative_dir,
            positive_dir,
            negative_domain,
            positive_domain,
            out,
        } => {
            let rule = LabelRule::new(vec![
                (
                    negative_dir,
                    Label::Negative,
                    Provenance::Real,
                    negative_domain.into(),
                ),
                (
                    positive_dir,
                    Label::Positive,
                    Provenance::Real,
                    positive_domain.into(),
                ),
            ]);
            let outcome = ingest_directory(&root, &task, &rule)?;
            for (path, why) in &outcome.failures {
                eprintln!("warning: skipped {}: {why}", path.display());
            }
            if outcome.patient_ids_missing {
                eprintln!("warning: no patients.json found; splits will fall back to image level");
            }
            outcome.manifest.save(&out)?;
            println!(
                "{} records ({} negative / {} positive), digest {}",
                outcome.manifest.len(),
                outcome.manifest.count_label(Label::Negative),
                outcome.manifest.count_label(Label::Positive),
                outcome.manifest.content_digest
            );
            Ok(())
        }
        Command::Split {
            manifest,
            fraction,
            seed,
            unit,
            out_train,
            out_test,
        } => {
            let m = DatasetManifest::load("task", &manifest)?;
            let spec = SplitSpec {
                train_fraction: fraction,
                seed,
                unit: match unit {
                    UnitArg::Patient => SplitUnit::Patient,
                    UnitArg::Image => SplitUnit::Image,
                },
            };
            let (train, test) = patient_level_split(&m, &spec)?;
            train.save(&out_train)?;
            test.save(&out_test)?;
            println!("train {} / test {}", train.len(), test.len());
            Ok(())
        }
        Command::Skew { manifest } => {
            let m = DatasetManifest::load("task", &manifest)?;
            let report = compute_skew(&m)?;
            println!(
                "negatives {} / positives {} -> skew {:.4}",
                report.negatives, report.positives, report.skew
            );
            Ok(())
        }
        Command::Undersample {
            manifest,
            target,
            seed,
            out,
        } => {
            let m = DatasetManifest::load("task", &manifest)?;
            let reduced = undersample_majority(&m, target, seed)?;
            reduced.save(&out)?;
            println!("{} records retained", reduced.len());
            Ok(())
        }
        Command::TrainGan {
            domain_a,
            domain_b,
            root,
            image_size,
            width,
            blocks,
            disc_layers,
            disc_width,
            lambda,
            learning_rate,
            batch_size,
            steps,
            mode,
            pool,
            seed,
            checkpoint_every,
            out,
        } => {
            let a = DatasetManifest::load("task", &domain_a)?;
            let b = DatasetManifest::load("task", &domain_b)?;
            let gen_spec = GeneratorSpec {
                input_channels: 1,
                base_width: width,
                residual_blocks: blocks,
                output_activation: OutputActivation::Tanh,
            };
            let disc_spec = DiscriminatorSpec::new(1, disc_layers, disc_width);
            let hp = GanHyperparams {
                lambda_cycle: lambda,
                learning_rate,
                batch_size,
                total_steps: steps,
                adversarial_mode: match mode {
                    ModeArg::Log => AdversarialMode::Log,
                    ModeArg::LeastSquares => AdversarialMode::LeastSquares,
                },
                image_pool_size: pool,
                seed,
            };
            let parent = out.parent().map(|p| p.to_path_buf());
            let opts = TrainOptions {
                image_size,
                checkpoint_every,
                checkpoint_dir: parent,
                log_every: 50,
            };
            let mut model = train_translation(&a, &root, &b, &root, &gen_spec, &disc_spec, &hp, &opts)?;
            save_model(&mut model, &out)?;
            loss_history_csv(&model.loss_history).write(&out.with_extension("csv"))?;
            println!("trained {} steps -> {}", model.step_count, out.display());
            Ok(())
        }
        Command::Synthesize {
            model,
            majority,
            root,
            direction,
            name,
            target_domain,
            image_size,
            out,
        } => {
            let mut m = load_model(&model)?;
            let majority_manifest = DatasetManifest::load("task", &majority)?;
            let set = synthesize_minority(
                &mut m,
                &majority_manifest,
                &root,
                match direction {
                    DirectionArg::AToB => Direction::AToB,
                    DirectionArg::BToA => Direction::BToA,
                },
                &name,
                target_domain.into(),
                image_size,
            )?;
            export_dataset(&set, &out, Some(&m.hyperparams))?;
            println!("{} synthetic images -> {}", set.manifest.len(), out.display());
            Ok(())
        }
        Command::TrainClf {
            train_manifest,
            root,
            config,
            image_size,
            out,
        } => {
            let cfg: TrainingConfig = read_json(&config)?;
            let manifest = DatasetManifest::load("task", &train_manifest)?;
            let mut model = cyclesynth_core::classifier::train_classifier(
                &cfg,
                &manifest,
                &root,
                image_size,
                out.parent(),
            )?;
            save_classifier(&mut model, &out)?;
            let mut curve = CsvTable::new(&["epoch", "loss"]);
            for (i, loss) in model.curve.iter().enumerate() {
                curve.push_row(vec![(i + 1).to_string(), fmt_f64(*loss)]);
            }
            curve.write(&out.with_extension("csv"))?;
            println!(
                "stopped after epoch {} (final loss {:.6})",
                model.stopped_epoch,
                model.curve.last().copied().unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Evaluate {
            model,
            test,
            root,
            threshold,
            image_size,
            out,
        } => {
            let mut clf = load_classifier(&model)?;
            let test_manifest = DatasetManifest::load("task", &test)?;
            let report = evaluate(&mut clf, &test_manifest, &root, image_size, threshold)?;
            write_json(&out, &report)?;
            println!(
                "TP {} FP {} TN {} FN {} -> sensitivity {:.2}%",
                report.true_positives,
                report.false_positives,
                report.true_negatives,
                report.false_negatives,
                report.sensitivity
            );
            Ok(())
        }
        Command::Merge {
            manifests,
            roots,
            out,
        } => {
            if manifests.len() != roots.len() {
                return Err(Error::Config(
                    "--manifests and --roots must have matching lengths".into(),
                ));
            }
            let mut absolutized = Vec::new();
            for (path, root) in manifests.iter().zip(&roots) {
                let m = DatasetManifest::load("task", path)?;
                absolutized.push(m.with_root(root)?);
            }
            let refs: Vec<&DatasetManifest> = absolutized.iter().collect();
            let merged = cyclesynth_core::data::merge_manifests(&refs)?;
            merged.save(&out)?;
            println!("{} records -> {}", merged.len(), out.display());
            Ok(())
        }
        Command::Compare { reports, skews, out } => {
            if reports.len() != skews.len() {
                return Err(Error::Config(
                    "--reports and --skews must have matching lengths".into(),
                ));
            }
            let mut loaded: Vec<EvalReport> = Vec::new();
            for path in &reports {
                loaded.push(read_json(path)?);
            }
            let mut skew_reports = Vec::new();
            for path in &skews {
                skew_reports.push(read_json(path)?);
            }
            let cmp = comparison_report(&loaded, &skew_reports)?;
            cmp.csv.write(&out)?;
            print!("{}", cmp.text);
            Ok(())
        }
        Command::Embed {
            manifest,
            root,
            source,
            model,
            n_neighbors,
            min_dist,
            epochs,
            seed,
            image_size,
            out,
        } => {
            let m = DatasetManifest::load("task", &manifest)?;
            let source = match source {
                SourceArg::RawPixels => FeatureSource::RawPixels,
                SourceArg::ClassifierFeatures => FeatureSource::ClassifierFeatures,
            };
            let mut clf = match (&model, source) {
                (Some(path), FeatureSource::ClassifierFeatures) => Some(load_classifier(path)?),
                (None, FeatureSource::ClassifierFeatures) => {
                    return Err(Error::Config(
                        "--model is required for classifier features".into(),
                    ))
                }
                _ => None,
            };
            let features = extract_features(&m, &root, source, clf.as_mut(), image_size)?;
            let ids: Vec<String> = m.records.iter().map(|r| r.sample_id.clone()).collect();
            let labels: Vec<String> = m
                .records
                .iter()
                .map(|r| format!("{}/{}", r.label, r.provenance))
                .collect();
            let params = UmapParams {
                n_neighbors,
                min_dist,
                n_epochs: epochs,
                seed,
                ..UmapParams::default()
            };
            let mut result = compute_embedding(&features, ids, labels, &params)?;
            result.feature_source = source;
            export_embedding_plot(&result, &out)?;
            println!("embedded {} points -> {}.png / .csv", result.len(), out.display());
            Ok(())
        }
        Command::Run {
            config,
            output_root,
            seed,
        } => {
            let mut run_config = RunConfig::load(&config)?;
            if let Some(root) = output_root {
                run_config.output_root = root;
            }
            if let Some(seed) = seed {
                run_config.seed = seed;
            }
            let summary = run_pipeline(&run_config)?;
            println!(
                "pipeline complete: {} stage(s) run, {} skipped, {} artifact(s)",
                summary.stages_run.len(),
                summary.stages_skipped.len(),
                summary.artifacts.len()
            );
            Ok(())
        }
        Command::GenToy {
            out,
            n_a,
            n_b,
            size,
            seed,
        } => {
            generate_toy_corpus(
                &out,
                &ToySpec {
                    n_a,
                    n_b,
                    size,
                    seed,
                },
            )?;
            println!("toy corpus ({n_a} blobs / {n_b} rings) -> {}", out.display());
            Ok(())
        }
    }
}
