//! Scalar abstraction: every numeric kernel in the crate is generic over a
//! floating-point type so the same code runs in `f32` for speed and `f64` for
//! finite-difference verification.

use ndarray::NdFloat;

/// Floating-point scalar usable by all numeric kernels (`f32` or `f64`).
pub trait Scalar: NdFloat {
    fn cast(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn cast(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn cast(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}
