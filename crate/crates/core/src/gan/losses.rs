//! The adversarial and cycle-consistency losses.
//!
//! The log-mode adversarial value is the quantity the discriminator
//! maximizes: `E[log D(real)] + E[log(1 - D(translated))]`, with both
//! expectations taken as means over the batch and over the score grid.
//! Scores are clamped to `[EPS, 1 - EPS]` before logs. Least-squares mode
//! scores the same grids as `0.5 * (E[(D(real) - 1)^2] + E[D(translated)^2])`.

use super::build::Discriminator;
use super::{AdversarialMode, GanLossBundle};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::Array4;

/// Clamp bound for discriminator scores entering a logarithm.
pub const SCORE_EPS: f64 = 1e-7;

fn grid_mean_log<F: Scalar>(scores: &Array4<F>, one_minus: bool) -> f64 {
    let mut acc = 0.0f64;
    for &s in scores.iter() {
        let s = s.as_f64();
        let v = if one_minus { 1.0 - s } else { s };
        acc += v.clamp(SCORE_EPS, 1.0 - SCORE_EPS).ln();
    }
    acc / scores.len() as f64
}

fn grid_mean_sq_err<F: Scalar>(scores: &Array4<F>, target: f64) -> f64 {
    let mut acc = 0.0f64;
    for &s in scores.iter() {
        let d = s.as_f64() - target;
        acc += d * d;
    }
    acc / scores.len() as f64
}

/// Adversarial value computed directly from score grids (the oracle-facing
/// entry point; stubbed discriminators are expressed as literal grids).
pub fn adversarial_loss_from_scores<F: Scalar>(
    real_scores: &Array4<F>,
    translated_scores: &Array4<F>,
    mode: AdversarialMode,
) -> Result<f64> {
    if real_scores.is_empty() || translated_scores.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(match mode {
        AdversarialMode::Log => {
            grid_mean_log(real_scores, false) + grid_mean_log(translated_scores, true)
        }
        AdversarialMode::LeastSquares => {
            0.5 * (grid_mean_sq_err(real_scores, 1.0) + grid_mean_sq_err(translated_scores, 0.0))
        }
    })
}

/// Run the discriminator on both batches and score them. Batches must be
/// nonempty and share the spatial shape.
pub fn adversarial_loss<F: Scalar>(
    disc: &mut Discriminator<F>,
    real_batch: &Array4<F>,
    translated_batch: &Array4<F>,
    mode: AdversarialMode,
) -> Result<f64> {
    if real_batch.is_empty() || translated_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (_, c_r, h_r, w_r) = real_batch.dim();
    let (_, c_t, h_t, w_t) = translated_batch.dim();
    if (c_r, h_r, w_r) != (c_t, h_t, w_t) {
        return Err(Error::ShapeMismatch(format!(
            "real {:?} vs translated {:?}",
            real_batch.dim(),
            translated_batch.dim()
        )));
    }
    use crate::nn::Layer;
    let real_scores = disc.forward(real_batch, false);
    let translated_scores = disc.forward(translated_batch, false);
    adversarial_loss_from_scores(&real_scores, &translated_scores, mode)
}

/// Cycle-consistency loss: mean absolute reconstruction error of the A-pair
/// plus that of the B-pair. Means are per pixel, so the weight `lambda` is
/// resolution-independent.
pub fn cycle_loss<F: Scalar>(
    a_batch: &Array4<F>,
    a_reconstructed: &Array4<F>,
    b_batch: &Array4<F>,
    b_reconstructed: &Array4<F>,
) -> Result<f64> {
    Ok(mean_abs_diff(a_batch, a_reconstructed)? + mean_abs_diff(b_batch, b_reconstructed)?)
}

pub(crate) fn mean_abs_diff<F: Scalar>(x: &Array4<F>, y: &Array4<F>) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", x.dim(), y.dim())));
    }
    if x.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut acc = 0.0f64;
    for (&a, &b) in x.iter().zip(y.iter()) {
        acc += (a.as_f64() - b.as_f64()).abs();
    }
    Ok(acc / x.len() as f64)
}

/// Assemble the weighted bundle for one step; `total` is recomputed from the
/// parts in f64 so the recomposition invariant is exact.
pub fn total_loss(
    step: usize,
    adv_a_to_b: f64,
    adv_b_to_a: f64,
    cycle: f64,
    lambda_cycle: f64,
) -> GanLossBundle {
    GanLossBundle {
        step,
        adv_a_to_b,
        adv_b_to_a,
        cycle,
        total: adv_a_to_b + adv_b_to_a + lambda_cycle * cycle,
    }
}

// ---- training-side gradients -------------------------------------------

/// Gradient of the discriminator's minimization objective w.r.t. its scores
/// on real and fake grids, with the objective value.
pub fn disc_loss_and_grads<F: Scalar>(
    real_scores: &Array4<F>,
    fake_scores: &Array4<F>,
    mode: AdversarialMode,
) -> (f64, Array4<F>, Array4<F>) {
    let nr = real_scores.len() as f64;
    let nf = fake_scores.len() as f64;
    match mode {
        AdversarialMode::Log => {
            // minimize -(E log s_r + E log(1 - s_f))
            let loss = -(grid_mean_log(real_scores, false) + grid_mean_log(fake_scores, true));
            let d_real = real_scores.mapv(|s| {
                let s = s.as_f64();
                if (SCORE_EPS..=1.0 - SCORE_EPS).contains(&s) {
                    F::cast(-1.0 / (s * nr))
                } else {
                    F::zero()
                }
            });
            let d_fake = fake_scores.mapv(|s| {
                let s = s.as_f64();
                if (SCORE_EPS..=1.0 - SCORE_EPS).contains(&s) {
                    F::cast(1.0 / ((1.0 - s) * nf))
                } else {
                    F::zero()
                }
            });
            (loss, d_real, d_fake)
        }
        AdversarialMode::LeastSquares => {
            let loss =
                0.5 * (grid_mean_sq_err(real_scores, 1.0) + grid_mean_sq_err(fake_scores, 0.0));
            let d_real = real_scores.mapv(|s| F::cast((s.as_f64() - 1.0) / nr));
            let d_fake = fake_scores.mapv(|s| F::cast(s.as_f64() / nf));
            (loss, d_real, d_fake)
        }
    }
}

/// Gradient of the generator's adversarial objective w.r.t. the scores of its
/// translated batch. Log mode uses the non-saturating form (maximize
/// `log D(G(a))`); least-squares mode drives scores toward 1.
pub fn gen_adv_loss_and_grad<F: Scalar>(
    fake_scores: &Array4<F>,
    mode: AdversarialMode,
) -> (f64, Array4<F>) {
    let n = fake_scores.len() as f64;
    match mode {
        AdversarialMode::Log => {
            let loss = -grid_mean_log(fake_scores, false);
            let grad = fake_scores.mapv(|s| {
                let s = s.as_f64();
                if (SCORE_EPS..=1.0 - SCORE_EPS).contains(&s) {
                    F::cast(-1.0 / (s * n))
                } else {
                    F::zero()
                }
            });
            (loss, grad)
        }
        AdversarialMode::LeastSquares => {
            let loss = grid_mean_sq_err(fake_scores, 1.0);
            let grad = fake_scores.mapv(|s| F::cast(2.0 * (s.as_f64() - 1.0) / n));
            (loss, grad)
        }
    }
}

/// Gradient of `mean |pred - target|` w.r.t. `pred`.
pub fn l1_grad<F: Scalar>(pred: &Array4<F>, target: &Array4<F>) -> Array4<F> {
    let n = F::cast(pred.len() as f64);
    let mut grad = pred.clone();
    grad.zip_mut_with(target, |p, &t| {
        *p = if *p > t {
            F::one() / n
        } else if *p < t {
            -F::one() / n
        } else {
            F::zero()
        };
    });
    grad
}
