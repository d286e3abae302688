//! Directory ingestion: walk a dataset root, decode every image file, and
//! build a manifest. Subdirectory names map to labels and source domains
//! through a [`LabelRule`].
//!
//! Patient ids come from an optional `patients.json` file at the dataset root
//! mapping relative paths to patient identifiers. Roots without one produce
//! records with absent patient ids (splits then fall back to image level with
//! a warning).

use super::{DatasetManifest, Label, ManifestRecord, Provenance, SourceDomain};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Maps a class subdirectory to its label, provenance, and source domain.
#[derive(Debug, Clone)]
pub struct LabelRule {
    pub entries: Vec<(String, Label, Provenance, SourceDomain)>,
}

impl LabelRule {
    pub fn new(entries: Vec<(String, Label, Provenance, SourceDomain)>) -> Self {
        LabelRule { entries }
    }

    fn lookup(&self, dir_name: &str) -> Option<(Label, Provenance, SourceDomain)> {
        self.entries
            .iter()
            .find(|(name, _, _, _)| name == dir_name)
            .map(|(_, l, p, d)| (*l, *p, *d))
    }
}

/// Manifest plus per-file failures that did not abort the ingest.
#[derive(Debug)]
pub struct IngestOutcome {
    pub manifest: DatasetManifest,
    pub failures: Vec<(PathBuf, String)>,
    /// True when no `patients.json` mapping was found.
    pub patient_ids_missing: bool,
}

const PATIENT_MAP_FILE: &str = "patients.json";

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png") | Some("jpg") | Some("jpeg")
    )
}

fn sanitize_id(rel_path: &str) -> String {
    let stem = rel_path
        .rsplit_once('.')
        .map(|(s, _)| s)
        .unwrap_or(rel_path);
    stem.chars()
        .map(|c| match c {
            '/' | '\\' => '_',
            c if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' => c,
            _ => '-',
        })
        .collect()
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if is_image_file(&path) {
            out.push(path);
        }
    }
    Ok(())
}

/// Ingest every decodable image under `root` whose first-level subdirectory
/// matches the label rule. Unreadable files are reported, not fatal; a root
/// with no images at all is an error.
pub fn ingest_directory(
    root: &Path,
    task_name: &str,
    rule: &LabelRule,
) -> Result<IngestOutcome> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root does not exist"),
        ));
    }

    let patient_map: Option<BTreeMap<String, String>> = {
        let map_path = root.join(PATIENT_MAP_FILE);
        if map_path.is_file() {
            Some(crate::io::read_json(&map_path)?)
        } else {
            None
        }
    };

    let mut files = Vec::new();
    collect_files(root, &mut files)?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for path in files {
        let rel = path
            .strip_prefix(root)
            .expect("file under root")
            .to_string_lossy()
            .replace('\\', "/");
        let Some(first_dir) = rel.split('/').next().filter(|_| rel.contains('/')) else {
            continue; // top-level files carry no class directory
        };
        let Some((label, provenance, domain)) = rule.lookup(first_dir) else {
            continue; // unmapped subdirectory
        };
        // Decode now so corrupt files surface as record-level failures.
        match image::open(&path) {
            Ok(_) => {
                let patient_id = patient_map
                    .as_ref()
                    .and_then(|m| m.get(&rel).cloned());
                records.push(ManifestRecord {
                    path: rel.clone(),
                    sample_id: sanitize_id(&rel),
                    patient_id,
                    label,
                    provenance,
                    source_domain: domain,
                });
            }
            Err(e) => failures.push((path.clone(), e.to_string())),
        }
    }

    if records.is_empty() {
        return Err(Error::NoImagesFound { root: root.into() });
    }

    let patient_ids_missing = patient_map.is_none();
    let manifest = DatasetManifest::new(task_name, records)?;
    Ok(IngestOutcome {
        manifest,
        failures,
        patient_ids_missing,
    })
}
