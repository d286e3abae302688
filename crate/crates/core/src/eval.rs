//! Fixed-test-set evaluation: confusion counts, sensitivity, false negatives,
//! confidence scores, and cross-configuration comparison tables. The test set
//! must contain zero synthetic records; that protocol is enforced here, not
//! assumed.

use crate::classifier::train::{predict_manifest, TrainedClassifier};
use crate::data::{DatasetManifest, Label, Provenance, SkewReport};
use crate::error::{Error, Result};
use crate::io::csv::{fmt_f64, CsvTable};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Evaluation result for one training configuration on the shared test set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_id: String,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// Percentage of positive instances correctly classified.
    pub sensitivity: f64,
    /// `(sample_id, positive-class probability)` per test sample, manifest
    /// order.
    pub confidences: Vec<(String, f64)>,
    pub threshold: f64,
    /// Digest of the test manifest; comparisons require it to be identical
    /// across configurations.
    pub test_digest: String,
}

/// Confusion counts `(TP, FP, TN, FN)` for labeled positive-class
/// probabilities; a prediction is positive iff its probability is strictly
/// greater than the threshold.
pub fn confusion_counts(labeled_scores: &[(Label, f64)], threshold: f64) -> (usize, usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_count = 0;
    for &(label, p_pos) in labeled_scores {
        match (label, p_pos > threshold) {
            (Label::Positive, true) => tp += 1,
            (Label::Positive, false) => fn_count += 1,
            (Label::Negative, true) => fp += 1,
            (Label::Negative, false) => tn += 1,
        }
    }
    (tp, fp, tn, fn_count)
}

/// `100 * tp / (tp + fn)`. Errors when there are no positives.
pub fn sensitivity(tp: usize, false_negatives: usize) -> Result<f64> {
    if tp + false_negatives == 0 {
        return Err(Error::NoPositives);
    }
    Ok(100.0 * tp as f64 / (tp + false_negatives) as f64)
}

/// Evaluate a classifier on a synthetic-free test manifest. A positive
/// prediction is a positive-class probability strictly greater than the
/// threshold (ties classify negative).
pub fn evaluate(
    model: &mut TrainedClassifier,
    test: &DatasetManifest,
    root: &Path,
    image_size: usize,
    threshold: f64,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if let Some(record) = test
        .records
        .iter()
        .find(|r| r.provenance == Provenance::Synthetic)
    {
        return Err(Error::ProtocolViolation(format!(
            "test manifest contains synthetic record `{}`",
            record.sample_id
        )));
    }
    let confidences = predict_manifest(model, test, root, image_size)?;
    let labeled: Vec<(Label, f64)> = test
        .records
        .iter()
        .zip(&confidences)
        .map(|(record, (_, p))| (record.label, *p))
        .collect();
    let (tp, fp, tn, fn_count) = confusion_counts(&labeled, threshold);
    Ok(EvalReport {
        config_id: model.config.name.clone(),
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_count,
        sensitivity: sensitivity(tp, fn_count)?,
        confidences,
        threshold,
        test_digest: test.content_digest.clone(),
    })
}

/// Positive-class probabilities for real positive test records, manifest
/// order (the 0.5-threshold confidence scatter input). Empty input gives an
/// empty list.
pub fn confidence_scores(
    model: &mut TrainedClassifier,
    test_positives: &DatasetManifest,
    root: &Path,
    image_size: usize,
) -> Result<Vec<f64>> {
    for record in &test_positives.records {
        if record.label != Label::Positive || record.provenance != Provenance::Real {
            return Err(Error::InvalidSpec(format!(
                "confidence scores expect real positive records; `{}` is not",
                record.sample_id
            )));
        }
    }
    if test_positives.is_empty() {
        return Ok(Vec::new());
    }
    Ok(predict_manifest(model, test_positives, root, image_size)?
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

/// Cross-configuration comparison: one row per config with sensitivity,
/// false negatives, and training skew; the best sensitivity rows are flagged.
/// All reports must carry the same test digest.
pub struct ComparisonReport {
    pub csv: CsvTable,
    pub text: String,
}

pub fn comparison_report(
    reports: &[EvalReport],
    skews: &[SkewReport],
) -> Result<ComparisonReport> {
    if reports.is_empty() {
        return Err(Error::Config("no reports to compare".into()));
    }
    if skews.len() != reports.len() {
        return Err(Error::Config(format!(
            "{} reports but {} skew entries",
            reports.len(),
            skews.len()
        )));
    }
    let digest = &reports[0].test_digest;
    for report in reports {
        if &report.test_digest != digest {
            return Err(Error::MismatchedTestDigest(format!(
                "`{}` was evaluated on {}, expected {}",
                report.config_id, report.test_digest, digest
            )));
        }
    }
    let best = reports
        .iter()
        .map(|r| r.sensitivity)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut csv = CsvTable::new(&["config", "sensitivity_percent", "false_negatives", "train_skew", "best"]);
    let mut text = String::new();
    text.push_str(&format!(
        "{:<24} {:>8} {:>6} {:>10}\n",
        "config", "SEN(%)", "FN", "skew"
    ));
    for (report, skew) in reports.iter().zip(skews) {
        let is_best = report.sensitivity == best;
        csv.push_row(vec![
            report.config_id.clone(),
            fmt_f64(report.sensitivity),
            report.false_negatives.to_string(),
            fmt_f64(skew.skew),
            if is_best { "1" } else { "0" }.to_string(),
        ]);
        text.push_str(&format!(
            "{:<24} {:>8.2} {:>6} {:>10.2}{}\n",
            report.config_id,
            report.sensitivity,
            report.false_negatives,
            skew.skew,
            if is_best { "  <- best" } else { "" }
        ));
    }
    Ok(ComparisonReport { csv, text })
}
