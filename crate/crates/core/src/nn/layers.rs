//! Pointwise activations, the dense layer, residual blocks, and nearest
//! upsampling.

use super::{BufferVisitor, Layer, ParamVisitor, Sequential};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, Array4, Axis};

pub struct Relu<F: Scalar> {
    cache_x: Option<Array4<F>>,
}

impl<F: Scalar> Relu<F> {
    pub fn new() -> Self {
        Relu { cache_x: None }
    }
}

impl<F: Scalar> Layer<F> for Relu<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        if train {
            self.cache_x = Some(x.clone());
        }
        x.mapv(|v| if v > F::zero() { v } else { F::zero() })
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let x = self.cache_x.as_ref().expect("relu backward without forward");
        let mut grad = grad_out.clone();
        grad.zip_mut_with(x, |g, &v| {
            if v <= F::zero() {
                *g = F::zero();
            }
        });
        grad
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<'_, F>) {}
}

pub struct LeakyRelu<F: Scalar> {
    slope: F,
    cache_x: Option<Array4<F>>,
}

impl<F: Scalar> LeakyRelu<F> {
    pub fn new(slope: f64) -> Self {
        LeakyRelu {
            slope: F::cast(slope),
            cache_x: None,
        }
    }
}

impl<F: Scalar> Layer<F> for LeakyRelu<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        if train {
            self.cache_x = Some(x.clone());
        }
        let slope = self.slope;
        x.mapv(|v| if v > F::zero() { v } else { v * slope })
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let x = self
            .cache_x
            .as_ref()
            .expect("leaky relu backward without forward");
        let slope = self.slope;
        let mut grad = grad_out.clone();
        grad.zip_mut_with(x, |g, &v| {
            if v <= F::zero() {
                *g = *g * slope;
            }
        });
        grad
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<'_, F>) {}
}

pub struct Tanh<F: Scalar> {
    cache_y: Option<Array4<F>>,
}

impl<F: Scalar> Tanh<F> {
    pub fn new() -> Self {
        Tanh { cache_y: None }
    }
}

impl<F: Scalar> Layer<F> for Tanh<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let y = x.mapv(|v| v.tanh());
        if train {
            self.cache_y = Some(y.clone());
        }
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let y = self.cache_y.as_ref().expect("tanh backward without forward");
        let mut grad = grad_out.clone();
        grad.zip_mut_with(y, |g, &v| *g = *g * (F::one() - v * v));
        grad
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<'_, F>) {}
}

pub struct Sigmoid<F: Scalar> {
    cache_y: Option<Array4<F>>,
}

impl<F: Scalar> Sigmoid<F> {
    pub fn new() -> Self {
        Sigmoid { cache_y: None }
    }
}

impl<F: Scalar> Layer<F> for Sigmoid<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let y = x.mapv(|v| F::one() / (F::one() + (-v).exp()));
        if train {
            self.cache_y = Some(y.clone());
        }
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let y = self
            .cache_y
            .as_ref()
            .expect("sigmoid backward without forward");
        let mut grad = grad_out.clone();
        grad.zip_mut_with(y, |g, &v| *g = *g * v * (F::one() - v));
        grad
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<'_, F>) {}
}

/// Fully connected layer over flattened `(N, C*H*W)` inputs; emits
/// `(N, out, 1, 1)`.
pub struct Dense<F: Scalar> {
    pub in_features: usize,
    pub out_features: usize,
    weight: Array2<F>,
    bias: Array1<F>,
    w_grad: Array2<F>,
    b_grad: Array1<F>,
    cache_x: Option<Array2<F>>,
    cache_dim: Option<(usize, usize, usize, usize)>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(
        in_features: usize,
        out_features: usize,
        weight_std: f64,
        rng: &mut super::init::NormalSource,
    ) -> Self {
        let weight = Array2::from_shape_fn((out_features, in_features), |_| {
            F::cast(rng.sample() * weight_std)
        });
        Dense {
            in_features,
            out_features,
            w_grad: Array2::zeros(weight.raw_dim()),
            weight,
            bias: Array1::zeros(out_features),
            b_grad: Array1::zeros(out_features),
            cache_x: None,
            cache_dim: None,
        }
    }

    /// Zero every weight and bias (used for the symmetric-logits contract).
    pub fn zero_parameters(&mut self) {
        self.weight.fill(F::zero());
        self.bias.fill(F::zero());
    }
}

impl<F: Scalar> Layer<F> for Dense<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c * h * w, self.in_features, "dense input size mismatch");
        let flat = x
            .to_shape((n, self.in_features))
            .expect("dense flatten")
            .to_owned();
        let mut y = flat.dot(&self.weight.t());
        y += &self.bias.view().insert_axis(Axis(0));
        if train {
            self.cache_x = Some(flat);
            self.cache_dim = Some((n, c, h, w));
        }
        y.into_shape_with_order((n, self.out_features, 1, 1))
            .expect("dense output reshape")
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let x = self.cache_x.as_ref().expect("dense backward without forward");
        let (n, c, h, w) = self.cache_dim.expect("dense backward without forward");
        let g = grad_out
            .to_shape((n, self.out_features))
            .expect("dense grad reshape")
            .to_owned();
        self.w_grad += &g.t().dot(x);
        self.b_grad += &g.sum_axis(Axis(0));
        let dx = g.dot(&self.weight);
        dx.into_shape_with_order((n, c, h, w))
            .expect("dense input grad reshape")
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
        f(
            &format!("{prefix}weight"),
            self.weight.view_mut().into_dyn(),
            self.w_grad.view_mut().into_dyn(),
        );
        f(
            &format!("{prefix}bias"),
            self.bias.view_mut().into_dyn(),
            self.b_grad.view_mut().into_dyn(),
        );
    }
}

/// `y = x + body(x)`; spatial size and channel count must be preserved by the
/// body.
pub struct Residual<F: Scalar> {
    pub body: Sequential<F>,
}

impl<F: Scalar> Residual<F> {
    pub fn new(body: Sequential<F>) -> Self {
        Residual { body }
    }
}

impl<F: Scalar> Layer<F> for Residual<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let mut y = self.body.forward(x, train);
        y += x;
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let mut grad = self.body.backward(grad_out);
        grad += grad_out;
        grad
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
        self.body.visit_params(&format!("{prefix}body."), f);
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut BufferVisitor<'_, F>) {
        self.body.visit_buffers(&format!("{prefix}body."), f);
    }
}

/// Nearest-neighbor 2x spatial upsampling.
pub struct Upsample2x;

impl Upsample2x {
    pub fn new() -> Self {
        Upsample2x
    }
}

impl<F: Scalar> Layer<F> for Upsample2x {
    fn forward(&mut self, x: &Array4<F>, _train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        Array4::from_shape_fn((n, c, h * 2, w * 2), |(i, ci, y, xx)| {
            x[[i, ci, y / 2, xx / 2]]
        })
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let (n, c, h2, w2) = grad_out.dim();
        let (h, w) = (h2 / 2, w2 / 2);
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for i in 0..n {
            for ci in 0..c {
                for y in 0..h2 {
                    for xx in 0..w2 {
                        dx[[i, ci, y / 2, xx / 2]] =
                            dx[[i, ci, y / 2, xx / 2]] + grad_out[[i, ci, y, xx]];
                    }
                }
            }
        }
        dx
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<'_, F>) {}
}
