//! Deterministic weight initialization. All randomness in the crate flows
//! through ChaCha20 streams seeded from explicit integer seeds; the Box-Muller
//! transform below keeps the normal-sampling bit stream independent of any
//! external distribution crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Standard-normal sample source with a fixed, seed-determined stream.
pub struct NormalSource {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new(seed: u64) -> Self {
        NormalSource {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// One N(0, 1) draw via Box-Muller.
    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let mut u1: f64 = self.rng.random();
        while u1 <= f64::MIN_POSITIVE {
            u1 = self.rng.random();
        }
        let u2: f64 = self.rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// He initialization standard deviation for a fan-in.
pub fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

/// Deterministic Fisher-Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut ChaCha20Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
