//! Instance and batch normalization with affine parameters.

use super::{BufferVisitor, Layer, ParamVisitor};
use crate::scalar::Scalar;
use ndarray::{Array1, Array4};

/// Per-sample, per-channel normalization over the spatial dimensions.
pub struct InstanceNorm2d<F: Scalar> {
    pub channels: usize,
    eps: F,
    gamma: Array1<F>,
    beta: Array1<F>,
    g_grad: Array1<F>,
    b_grad: Array1<F>,
    /// `(x_hat, inv_std per (n, c))`
    cache: Option<(Array4<F>, ndarray::Array2<F>)>,
}

impl<F: Scalar> InstanceNorm2d<F> {
    pub fn new(channels: usize) -> Self {
        InstanceNorm2d {
            channels,
            eps: F::cast(1e-5),
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            g_grad: Array1::zeros(channels),
            b_grad: Array1::zeros(channels),
            cache: None,
        }
    }
}

impl<F: Scalar> Layer<F> for InstanceNorm2d<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels, "instance norm channel mismatch");
        let m = F::cast((h * w) as f64);
        let mut y = Array4::<F>::zeros((n, c, h, w));
        let mut x_hat = Array4::<F>::zeros((n, c, h, w));
        let mut inv_stds = ndarray::Array2::<F>::zeros((n, c));
        for i in 0..n {
            for ci in 0..c {
                let plane = x.index_axis(ndarray::Axis(0), i);
                let plane = plane.index_axis(ndarray::Axis(0), ci);
                let mean = plane.sum() / m;
                let mut var = F::zero();
                for &v in plane.iter() {
                    let d = v - mean;
                    var = var + d * d;
                }
                var = var / m;
                let inv_std = F::one() / (var + self.eps).sqrt();
                inv_stds[[i, ci]] = inv_std;
                let gamma = self.gamma[ci];
                let beta = self.beta[ci];
                for yy in 0..h {
                    for xx in 0..w {
                        let xh = (x[[i, ci, yy, xx]] - mean) * inv_std;
                        x_hat[[i, ci, yy, xx]] = xh;
                        y[[i, ci, yy, xx]] = gamma * xh + beta;
                    }
                }
            }
        }
        if train {
            self.cache = Some((x_hat, inv_stds));
        }
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let (x_hat, inv_stds) = self
            .cache
            .as_ref()
            .expect("instance norm backward without forward");
        let (n, c, h, w) = grad_out.dim();
        let m = F::cast((h * w) as f64);
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for i in 0..n {
            for ci in 0..c {
                let gamma = self.gamma[ci];
                let inv_std = inv_stds[[i, ci]];
                // Sums over the plane for the fused normalization gradient.
                let mut sum_dy = F::zero();
                let mut sum_dy_xhat = F::zero();
                for yy in 0..h {
                    for xx in 0..w {
                        let dy = grad_out[[i, ci, yy, xx]];
                        sum_dy = sum_dy + dy;
                        sum_dy_xhat = sum_dy_xhat + dy * x_hat[[i, ci, yy, xx]];
                    }
                }
                self.b_grad[ci] = self.b_grad[ci] + sum_dy;
                self.g_grad[ci] = self.g_grad[ci] + sum_dy_xhat;
                for yy in 0..h {
                    for xx in 0..w {
                        let dy = grad_out[[i, ci, yy, xx]];
                        let xh = x_hat[[i, ci, yy, xx]];
                        dx[[i, ci, yy, xx]] = gamma * inv_std / m
                            * (m * dy - sum_dy - xh * sum_dy_xhat);
                    }
                }
            }
        }
        dx
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
        f(
            &format!("{prefix}gamma"),
            self.gamma.view_mut().into_dyn(),
            self.g_grad.view_mut().into_dyn(),
        );
        f(
            &format!("{prefix}beta"),
            self.beta.view_mut().into_dyn(),
            self.b_grad.view_mut().into_dyn(),
        );
    }
}

/// Per-channel normalization over batch and spatial dimensions, with running
/// statistics for evaluation mode.
pub struct BatchNorm2d<F: Scalar> {
    pub channels: usize,
    eps: F,
    momentum: F,
    gamma: Array1<F>,
    beta: Array1<F>,
    g_grad: Array1<F>,
    b_grad: Array1<F>,
    running_mean: Array1<F>,
    running_var: Array1<F>,
    cache: Option<(Array4<F>, Array1<F>)>,
}

impl<F: Scalar> BatchNorm2d<F> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            channels,
            eps: F::cast(1e-5),
            momentum: F::cast(0.1),
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            g_grad: Array1::zeros(channels),
            b_grad: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            cache: None,
        }
    }
}

impl<F: Scalar> Layer<F> for BatchNorm2d<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels, "batch norm channel mismatch");
        let m = F::cast((n * h * w) as f64);
        let mut y = Array4::<F>::zeros((n, c, h, w));
        if train {
            let mut x_hat = Array4::<F>::zeros((n, c, h, w));
            let mut inv_stds = Array1::<F>::zeros(c);
            for ci in 0..c {
                let mut mean = F::zero();
                for i in 0..n {
                    for yy in 0..h {
                        for xx in 0..w {
                            mean = mean + x[[i, ci, yy, xx]];
                        }
                    }
                }
                mean = mean / m;
                let mut var = F::zero();
                for i in 0..n {
                    for yy in 0..h {
                        for xx in 0..w {
                            let d = x[[i, ci, yy, xx]] - mean;
                            var = var + d * d;
                        }
                    }
                }
                var = var / m;
                let inv_std = F::one() / (var + self.eps).sqrt();
                inv_stds[ci] = inv_std;
                self.running_mean[ci] = (F::one() - self.momentum) * self.running_mean[ci]
                    + self.momentum * mean;
                self.running_var[ci] =
                    (F::one() - self.momentum) * self.running_var[ci] + self.momentum * var;
                let gamma = self.gamma[ci];
                let beta = self.beta[ci];
                for i in 0..n {
                    for yy in 0..h {
                        for xx in 0..w {
                            let xh = (x[[i, ci, yy, xx]] - mean) * inv_std;
                            x_hat[[i, ci, yy, xx]] = xh;
                            y[[i, ci, yy, xx]] = gamma * xh + beta;
                        }
                    }
                }
            }
            self.cache = Some((x_hat, inv_stds));
        } else {
            for ci in 0..c {
                let inv_std = F::one() / (self.running_var[ci] + self.eps).sqrt();
                let mean = self.running_mean[ci];
                let gamma = self.gamma[ci];
                let beta = self.beta[ci];
                for i in 0..n {
                    for yy in 0..h {
                        for xx in 0..w {
                            y[[i, ci, yy, xx]] =
                                gamma * (x[[i, ci, yy, xx]] - mean) * inv_std + beta;
                        }
                    }
                }
            }
        }
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let (x_hat, inv_stds) = self
            .cache
            .as_ref()
            .expect("batch norm backward without forward");
        let (n, c, h, w) = grad_out.dim();
        let m = F::cast((n * h * w) as f64);
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for ci in 0..c {
            let gamma = self.gamma[ci];
            let inv_std = inv_stds[ci];
            let mut sum_dy = F::zero();
            let mut sum_dy_xhat = F::zero();
            for i in 0..n {
                for yy in 0..h {
                    for xx in 0..w {
                        let dy = grad_out[[i, ci, yy, xx]];
                        sum_dy = sum_dy + dy;
                        sum_dy_xhat = sum_dy_xhat + dy * x_hat[[i, ci, yy, xx]];
                    }
                }
            }
            self.b_grad[ci] = self.b_grad[ci] + sum_dy;
            self.g_grad[ci] = self.g_grad[ci] + sum_dy_xhat;
            for i in 0..n {
                for yy in 0..h {
                    for xx in 0..w {
                        let dy = grad_out[[i, ci, yy, xx]];
                        let xh = x_hat[[i, ci, yy, xx]];
                        dx[[i, ci, yy, xx]] =
                            gamma * inv_std / m * (m * dy - sum_dy - xh * sum_dy_xhat);
                    }
                }
            }
        }
        dx
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
        f(
            &format!("{prefix}gamma"),
            self.gamma.view_mut().into_dyn(),
            self.g_grad.view_mut().into_dyn(),
        );
        f(
            &format!("{prefix}beta"),
            self.beta.view_mut().into_dyn(),
            self.b_grad.view_mut().into_dyn(),
        );
    }

    fn visit_buffers(&mut self, prefix: &str, f: &mut BufferVisitor<'_, F>) {
        f(
            &format!("{prefix}running_mean"),
            self.running_mean.view_mut().into_dyn(),
        );
        f(
            &format!("{prefix}running_var"),
            self.running_var.view_mut().into_dyn(),
        );
    }
}
