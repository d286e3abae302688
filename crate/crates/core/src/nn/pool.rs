//! Pooling layers: max, average, and global average pooling.

use super::{Layer, ParamVisitor};
use crate::scalar::Scalar;
use ndarray::Array4;

pub struct MaxPool2d<F: Scalar> {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// Flat input index of the max for each output element.
    cache: Option<(Vec<usize>, (usize, usize, usize, usize))>,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> MaxPool2d<F> {
    pub fn new(kernel: usize, stride: usize, pad: usize) -> Self {
        MaxPool2d {
            kernel,
            stride,
            pad,
            cache: None,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Scalar> Layer<F> for MaxPool2d<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        let h_out = (h + 2 * self.pad - self.kernel) / self.stride + 1;
        let w_out = (w + 2 * self.pad - self.kernel) / self.stride + 1;
        let mut y = Array4::<F>::zeros((n, c, h_out, w_out));
        let mut argmax = vec![0usize; n * c * h_out * w_out];
        let mut out_idx = 0;
        for i in 0..n {
            for ci in 0..c {
                for oy in 0..h_out {
                    for ox in 0..w_out {
                        let mut best = F::neg_infinity();
                        let mut best_idx = 0;
                        for ky in 0..self.kernel {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..self.kernel {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let v = x[[i, ci, iy as usize, ix as usize]];
                                if v > best {
                                    best = v;
                                    best_idx = ((i * c + ci) * h + iy as usize) * w + ix as usize;
                                }
                            }
                        }
                        y[[i, ci, oy, ox]] = best;
                        argmax[out_idx] = best_idx;
                        out_idx += 1;
                    }
                }
            }
        }
        if train {
            self.cache = Some((argmax, (n, c, h, w)));
        }
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let (argmax, dim) = self.cache.as_ref().expect("max pool backward without forward");
        let mut dx = Array4::<F>::zeros(*dim);
        let dx_flat = dx.as_slice_mut().expect("contiguous");
        for (g, &src) in grad_out.iter().zip(argmax.iter()) {
            dx_flat[src] = dx_flat[src] + *g;
        }
        dx
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<'_, F>) {}
}

pub struct AvgPool2d<F: Scalar> {
    pub kernel: usize,
    pub stride: usize,
    cache_dim: Option<(usize, usize, usize, usize)>,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> AvgPool2d<F> {
    pub fn new(kernel: usize, stride: usize) -> Self {
        AvgPool2d {
            kernel,
            stride,
            cache_dim: None,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Scalar> Layer<F> for AvgPool2d<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        let h_out = (h - self.kernel) / self.stride + 1;
        let w_out = (w - self.kernel) / self.stride + 1;
        let norm = F::cast((self.kernel * self.kernel) as f64);
        let mut y = Array4::<F>::zeros((n, c, h_out, w_out));
        for i in 0..n {
            for ci in 0..c {
                for oy in 0..h_out {
                    for ox in 0..w_out {
                        let mut acc = F::zero();
                        for ky in 0..self.kernel {
                            for kx in 0..self.kernel {
                                acc = acc
                                    + x[[i, ci, oy * self.stride + ky, ox * self.stride + kx]];
                            }
                        }
                        y[[i, ci, oy, ox]] = acc / norm;
                    }
                }
            }
        }
        if train {
            self.cache_dim = Some((n, c, h, w));
        }
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let dim = self.cache_dim.expect("avg pool backward without forward");
        let (_, _, h_out, w_out) = grad_out.dim();
        let norm = F::cast((self.kernel * self.kernel) as f64);
        let mut dx = Array4::<F>::zeros(dim);
        for i in 0..dim.0 {
            for ci in 0..dim.1 {
                for oy in 0..h_out {
                    for ox in 0..w_out {
                        let g = grad_out[[i, ci, oy, ox]] / norm;
                        for ky in 0..self.kernel {
                            for kx in 0..self.kernel {
                                let iy = oy * self.stride + ky;
                                let ix = ox * self.stride + kx;
                                dx[[i, ci, iy, ix]] = dx[[i, ci, iy, ix]] + g;
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<'_, F>) {}
}

/// Global average pooling: `(N, C, H, W)` to `(N, C, 1, 1)`. No trainable
/// parameters.
pub struct GlobalAvgPool<F: Scalar> {
    cache_dim: Option<(usize, usize, usize, usize)>,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> GlobalAvgPool<F> {
    pub fn new() -> Self {
        GlobalAvgPool {
            cache_dim: None,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Scalar> Default for GlobalAvgPool<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Layer<F> for GlobalAvgPool<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        if train {
            self.cache_dim = Some((n, c, h, w));
        }
        let norm = F::cast((h * w) as f64);
        let mut y = Array4::<F>::zeros((n, c, 1, 1));
        for i in 0..n {
            for ci in 0..c {
                let mut acc = F::zero();
                for yy in 0..h {
                    for xx in 0..w {
                        acc = acc + x[[i, ci, yy, xx]];
                    }
                }
                y[[i, ci, 0, 0]] = acc / norm;
            }
        }
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let (n, c, h, w) = self.cache_dim.expect("gap backward without forward");
        let norm = F::cast((h * w) as f64);
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for i in 0..n {
            for ci in 0..c {
                let g = grad_out[[i, ci, 0, 0]] / norm;
                for yy in 0..h {
                    for xx in 0..w {
                        dx[[i, ci, yy, xx]] = g;
                    }
                }
            }
        }
        dx
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<'_, F>) {}
}
