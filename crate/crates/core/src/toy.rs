//! Procedurally generated toy corpus: domain A holds bright filled discs
//! ("blobs"), domain B holds bright annuli ("rings"), both over a noisy dark
//! background. The motifs are easy for a small classifier to separate and
//! easy for the translation engine to map onto each other, which makes them
//! the desk-scale stand-in for the real radiograph domains.

use crate::data::{Label, Provenance, SourceDomain};
use crate::error::{Error, Result};
use crate::synthesis::write_png_gray;
use crate::Real;
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub struct ToySpec {
    /// Images in domain A (blobs; the majority/negative class).
    pub n_a: usize,
    /// Images in domain B (rings; the minority/positive class).
    pub n_b: usize,
    pub size: usize,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            n_a: 200,
            n_b: 200,
            size: 64,
            seed: 0,
        }
    }
}

pub const DOMAIN_A_DIR: &str = "domain_a";
pub const DOMAIN_B_DIR: &str = "domain_b";

struct Motif {
    cx: f64,
    cy: f64,
    radius: f64,
    intensity: f64,
}

fn sample_motif(size: usize, rng: &mut ChaCha20Rng) -> Motif {
    let s = size as f64;
    Motif {
        cx: s * (0.35 + 0.3 * rng.random::<f64>()),
        cy: s * (0.35 + 0.3 * rng.random::<f64>()),
        radius: s * (0.14 + 0.10 * rng.random::<f64>()),
        intensity: 0.75 + 0.2 * rng.random::<f64>(),
    }
}

fn background(size: usize, rng: &mut ChaCha20Rng) -> Array3<Real> {
    Array3::from_shape_fn((size, size, 1), |_| {
        (0.03 + 0.09 * rng.random::<f64>()) as Real
    })
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Filled disc with a soft edge.
pub fn blob_image(size: usize, rng: &mut ChaCha20Rng) -> Array3<Real> {
    let motif = sample_motif(size, rng);
    let mut img = background(size, rng);
    for y in 0..size {
        for x in 0..size {
            let d = ((x as f64 - motif.cx).powi(2) + (y as f64 - motif.cy).powi(2)).sqrt();
            let coverage = 1.0 - smoothstep(motif.radius - 1.5, motif.radius + 1.5, d);
            let v = img[[y, x, 0]] as f64 * (1.0 - coverage) + motif.intensity * coverage;
            img[[y, x, 0]] = v.clamp(0.0, 1.0) as Real;
        }
    }
    img
}

/// Annulus (bright outline, dark interior) with soft edges.
pub fn ring_image(size: usize, rng: &mut ChaCha20Rng) -> Array3<Real> {
    let motif = sample_motif(size, rng);
    let thickness = (motif.radius * 0.3).max(2.5);
    let mut img = background(size, rng);
    for y in 0..size {
        for x in 0..size {
            let d = ((x as f64 - motif.cx).powi(2) + (y as f64 - motif.cy).powi(2)).sqrt();
            let outer = 1.0 - smoothstep(motif.radius - 1.5, motif.radius + 1.5, d);
            let inner = 1.0
                - smoothstep(
                    motif.radius - thickness - 1.5,
                    motif.radius - thickness + 1.5,
                    d,
                );
            let coverage = (outer - inner).clamp(0.0, 1.0);
            let v = img[[y, x, 0]] as f64 * (1.0 - coverage) + motif.intensity * coverage;
            img[[y, x, 0]] = v.clamp(0.0, 1.0) as Real;
        }
    }
    img
}

/// Write the corpus under `root`: `domain_a/*.png`, `domain_b/*.png`, and a
/// `patients.json` mapping (two consecutive images share a patient, so
/// patient-level splits are exercised for real).
pub fn generate_toy_corpus(root: &Path, spec: &ToySpec) -> Result<()> {
    if spec.size < 16 {
        return Err(Error::Config("toy images must be at least 16 px".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut patients: BTreeMap<String, String> = BTreeMap::new();
    for i in 0..spec.n_a {
        let img = blob_image(spec.size, &mut rng);
        let rel = format!("{DOMAIN_A_DIR}/a_{i:04}.png");
        write_png_gray(&root.join(&rel), &img)?;
        patients.insert(rel, format!("pa_{:04}", i / 2));
    }
    for i in 0..spec.n_b {
        let img = ring_image(spec.size, &mut rng);
        let rel = format!("{DOMAIN_B_DIR}/b_{i:04}.png");
        write_png_gray(&root.join(&rel), &img)?;
        patients.insert(rel, format!("pb_{:04}", i / 2));
    }
    crate::io::write_json(&root.join("patients.json"), &patients)
}

/// Label rule for the toy corpus layout: domain A negative, domain B
/// positive, both real.
pub fn toy_label_rule() -> crate::data::LabelRule {
    crate::data::LabelRule::new(vec![
        (
            DOMAIN_A_DIR.into(),
            Label::Negative,
            Provenance::Real,
            SourceDomain::ToyA,
        ),
        (
            DOMAIN_B_DIR.into(),
            Label::Positive,
            Provenance::Real,
            SourceDomain::ToyB,
        ),
    ])
}
