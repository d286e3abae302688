//! Small deterministic CPU neural-network stack.
//!
//! Layers operate on `(N, C, H, W)` batches, cache what they need during a
//! training-mode forward pass, and implement explicit backward passes that
//! accumulate parameter gradients. Everything is generic over [`Scalar`] so
//! the same kernels run in `f32` for training and `f64` for finite-difference
//! verification. No layer uses threads or order-dependent parallel reductions:
//! identical inputs and seeds give bitwise-identical results.

pub mod conv;
pub mod fdcheck;
pub mod init;
pub mod layers;
pub mod loss;
pub mod norm;
pub mod optim;
pub mod pool;

pub use conv::Conv2d;
pub use layers::{Dense, LeakyRelu, Relu, Residual, Sigmoid, Tanh, Upsample2x};
pub use norm::{BatchNorm2d, InstanceNorm2d};
pub use pool::{AvgPool2d, GlobalAvgPool, MaxPool2d};

use crate::scalar::Scalar;
use ndarray::{Array4, ArrayViewMutD};

/// Visitor over `(name, value, grad)` parameter triples in a fixed order.
pub type ParamVisitor<'v, F> = dyn FnMut(&str, ArrayViewMutD<'_, F>, ArrayViewMutD<'_, F>) + 'v;
/// Visitor over `(name, value)` for non-trainable state (running statistics).
pub type BufferVisitor<'v, F> = dyn FnMut(&str, ArrayViewMutD<'_, F>) + 'v;

pub trait Layer<F: Scalar>: Send {
    /// Forward pass. `train` enables activation caching (needed for
    /// `backward`) and training-mode statistics in normalization layers.
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F>;

    /// Backward pass for the most recent training-mode forward. Accumulates
    /// parameter gradients and returns the gradient w.r.t. the layer input.
    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F>;

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>);

    /// Non-trainable state that must survive checkpointing (default: none).
    fn visit_buffers(&mut self, _prefix: &str, _f: &mut BufferVisitor<'_, F>) {}
}

/// Ordered container of named layers.
pub struct Sequential<F: Scalar> {
    layers: Vec<(String, Box<dyn Layer<F>>)>,
}

impl<F: Scalar> Sequential<F> {
    pub fn new() -> Self {
        Sequential { layers: Vec::new() }
    }

    pub fn push(&mut self, name: &str, layer: impl Layer<F> + 'static) {
        self.layers.push((name.to_string(), Box::new(layer)));
    }

    pub fn push_boxed(&mut self, name: &str, layer: Box<dyn Layer<F>>) {
        self.layers.push((name.to_string(), layer));
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl<F: Scalar> Default for Sequential<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Layer<F> for Sequential<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let mut cur = x.clone();
        for (_, layer) in &mut self.layers {
            cur = layer.forward(&cur, train);
        }
        cur
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let mut grad = grad_out.clone();
        for (_, layer) in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad);
        }
        grad
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
        for (name, layer) in &mut self.layers {
            layer.visit_params(&format!("{prefix}{name}."), f);
        }
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut BufferVisitor<'_, F>) {
        for (name, layer) in &mut self.layers {
            layer.visit_buffers(&format!("{prefix}{name}."), f);
        }
    }
}

/// Total number of trainable scalars in a layer tree.
pub fn param_count<F: Scalar>(layer: &mut dyn Layer<F>) -> usize {
    let mut count = 0;
    layer.visit_params("", &mut |_, value, _| count += value.len());
    count
}

/// Zero every accumulated gradient.
pub fn zero_grads<F: Scalar>(layer: &mut dyn Layer<F>) {
    layer.visit_params("", &mut |_, _, mut grad| grad.fill(F::zero()));
}

/// Snapshot all parameters as `(name, f64 tensor)` pairs in visit order.
pub fn export_params<F: Scalar>(layer: &mut dyn Layer<F>) -> Vec<(String, ndarray::ArrayD<f64>)> {
    let mut out = Vec::new();
    layer.visit_params("", &mut |name, value, _| {
        out.push((name.to_string(), value.mapv(|v| v.as_f64())));
    });
    out
}

/// Snapshot all non-trainable buffers as `(name, f64 tensor)` pairs.
pub fn export_buffers<F: Scalar>(layer: &mut dyn Layer<F>) -> Vec<(String, ndarray::ArrayD<f64>)> {
    let mut out = Vec::new();
    layer.visit_buffers("", &mut |name, value| {
        out.push((name.to_string(), value.mapv(|v| v.as_f64())));
    });
    out
}

/// Gradient snapshot in visit order (after a forward/backward pass).
pub fn export_grads<F: Scalar>(layer: &mut dyn Layer<F>) -> Vec<(String, ndarray::ArrayD<f64>)> {
    let mut out = Vec::new();
    layer.visit_params("", &mut |name, _, grad| {
        out.push((name.to_string(), grad.mapv(|v| v.as_f64())));
    });
    out
}

/// Load parameters and buffers from `(name, tensor)` pairs; every tensor in
/// the layer tree must be present with a matching shape.
pub fn import_state<F: Scalar>(
    layer: &mut dyn Layer<F>,
    params: &[(String, ndarray::ArrayD<f64>)],
    buffers: &[(String, ndarray::ArrayD<f64>)],
) -> crate::error::Result<()> {
    let mut problems: Vec<String> = Vec::new();
    {
        let mut assign =
            |name: &str, mut dst: ArrayViewMutD<'_, F>, src: Option<&ndarray::ArrayD<f64>>| match src
            {
                Some(src) if src.shape() == dst.shape() => {
                    dst.zip_mut_with(src, |d, s| *d = F::cast(*s));
                }
                Some(src) => problems.push(format!(
                    "`{name}`: shape {:?} != checkpoint {:?}",
                    dst.shape(),
                    src.shape()
                )),
                None => problems.push(format!("`{name}`: absent from checkpoint")),
            };
        layer.visit_params("", &mut |name, value, _grad| {
            let src = params.iter().find(|(n, _)| n == name).map(|(_, t)| t);
            assign(name, value, src);
        });
        layer.visit_buffers("", &mut |name, value| {
            let src = buffers.iter().find(|(n, _)| n == name).map(|(_, t)| t);
            assign(name, value, src);
        });
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(crate::error::Error::Checkpoint(problems.join("; ")))
    }
}
