//! Buffer of past generated images used for discriminator updates; damps
//! training oscillation. With probability one half a query returns a stored
//! image and stows the incoming one in its place.

use crate::scalar::Scalar;
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct ImagePool<F: Scalar> {
    capacity: usize,
    items: Vec<Array4<F>>,
    rng: ChaCha20Rng,
}

impl<F: Scalar> ImagePool<F> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        ImagePool {
            capacity,
            items: Vec::with_capacity(capacity),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Offer a freshly generated batch; receive the batch to train the
    /// discriminator on. A zero-capacity pool passes batches through.
    pub fn query(&mut self, fresh: Array4<F>) -> Array4<F> {
        if self.capacity == 0 {
            return fresh;
        }
        if self.items.len() < self.capacity {
            self.items.push(fresh.clone());
            return fresh;
        }
        if self.rng.random::<f64>() < 0.5 {
            let idx = self.rng.random_range(0..self.items.len());
            let stored = self.items[idx].clone();
            self.items[idx] = fresh;
            stored
        } else {
            fresh
        }
    }
}
