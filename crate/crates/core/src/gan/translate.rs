//! Inference: map `[0, 1]` image batches through a trained generator and
//! back to `[0, 1]`.

use super::{Direction, TranslationModel};
use crate::error::{Error, Result};
use crate::nn::Layer;
use crate::Real;
use ndarray::Array4;

/// Translate a `N x C x H x W` batch in `[0, 1]`. Output has the same shape,
/// values in `[0, 1]`, order preserved. Inference is deterministic.
pub fn translate(
    model: &mut TranslationModel<Real>,
    batch: &Array4<Real>,
    direction: Direction,
) -> Result<Array4<Real>> {
    let (_, c, _, _) = batch.dim();
    let expected = model.g_a_to_b.spec.input_channels;
    if c != expected {
        return Err(Error::ShapeMismatch(format!(
            "expected {expected} channels, got {c}"
        )));
    }
    let signed = batch.mapv(|v| v * 2.0 - 1.0);
    let gen = match direction {
        Direction::AToB => &mut model.g_a_to_b,
        Direction::BToA => &mut model.g_b_to_a,
    };
    let out = gen.forward(&signed, false);
    Ok(out.mapv(|v: Real| ((v + 1.0) / 2.0).clamp(0.0, 1.0)))
}
