//! Minimal CSV writing for the numeric tables the pipeline emits. Fields never
//! contain commas or quotes (sample ids are sanitized at ingest), so no
//! escaping is required.

use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

/// Format a float with full round-trip precision, stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
