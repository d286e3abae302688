//! 2-D convolution via im2col and matrix multiplication.

use super::{Layer, ParamVisitor};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, Array3, Array4, ArrayView3, Axis};

pub struct Conv2d<F: Scalar> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// `(out_ch, in_ch * kernel * kernel)`
    weight: Array2<F>,
    bias: Option<Array1<F>>,
    w_grad: Array2<F>,
    b_grad: Option<Array1<F>>,
    cache_x: Option<Array4<F>>,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        weight_std: f64,
        rng: &mut super::init::NormalSource,
    ) -> Self {
        let cols = in_ch * kernel * kernel;
        let weight = Array2::from_shape_fn((out_ch, cols), |_| {
            F::cast(rng.sample() * weight_std)
        });
        Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
            w_grad: Array2::zeros(weight.raw_dim()),
            weight,
            bias: bias.then(|| Array1::zeros(out_ch)),
            b_grad: bias.then(|| Array1::zeros(out_ch)),
            cache_x: None,
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kernel) / self.stride + 1,
            (w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }

    fn im2col(&self, x: &ArrayView3<'_, F>, h_out: usize, w_out: usize) -> Array2<F> {
        let (c, h, w) = x.dim();
        debug_assert_eq!(c, self.in_ch);
        let k = self.kernel;
        let mut col = Array2::<F>::zeros((c * k * k, h_out * w_out));
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let mut col_row = col.row_mut(row);
                    for oy in 0..h_out {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = oy * w_out;
                        for ox in 0..w_out {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            col_row[base + ox] = x[[ci, iy as usize, ix as usize]];
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, dcol: &Array2<F>, h: usize, w: usize, h_out: usize, w_out: usize) -> Array3<F> {
        let k = self.kernel;
        let mut dx = Array3::<F>::zeros((self.in_ch, h, w));
        for ci in 0..self.in_ch {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let dcol_row = dcol.row(row);
                    for oy in 0..h_out {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = oy * w_out;
                        for ox in 0..w_out {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            dx[[ci, iy as usize, ix as usize]] =
                                dx[[ci, iy as usize, ix as usize]] + dcol_row[base + ox];
                        }
                    }
                }
            }
        }
        dx
    }
}

impl<F: Scalar> Layer<F> for Conv2d<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_ch, "conv input channel mismatch");
        let (h_out, w_out) = self.out_size(h, w);
        let mut y = Array4::<F>::zeros((n, self.out_ch, h_out, w_out));
        for i in 0..n {
            let col = self.im2col(&x.index_axis(Axis(0), i), h_out, w_out);
            let mut y_mat = self.weight.dot(&col);
            if let Some(bias) = &self.bias {
                y_mat += &bias.view().insert_axis(Axis(1));
            }
            let y_view = y_mat
                .to_shape((self.out_ch, h_out, w_out))
                .expect("conv output reshape");
            y.index_axis_mut(Axis(0), i).assign(&y_view);
        }
        if train {
            self.cache_x = Some(x.clone());
        }
        y
    }

    fn backward(&mut self, grad_out: &Array4<F>) -> Array4<F> {
        let x = self.cache_x.as_ref().expect("conv backward without forward");
        let (n, _, h, w) = x.dim();
        let (_, _, h_out, w_out) = grad_out.dim();
        let mut dx = Array4::<F>::zeros(x.raw_dim());
        for i in 0..n {
            let col = self.im2col(&x.index_axis(Axis(0), i), h_out, w_out);
            let g = grad_out.index_axis(Axis(0), i);
            let g_mat = g.to_shape((self.out_ch, h_out * w_out)).expect("grad reshape");
            self.w_grad += &g_mat.dot(&col.t());
            if let Some(b_grad) = &mut self.b_grad {
                *b_grad += &g_mat.sum_axis(Axis(1));
            }
            let dcol = self.weight.t().dot(&g_mat);
            dx.index_axis_mut(Axis(0), i)
                .assign(&self.col2im(&dcol, h, w, h_out, w_out));
        }
        dx
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<'_, F>) {
        f(
            &format!("{prefix}weight"),
            self.weight.view_mut().into_dyn(),
            self.w_grad.view_mut().into_dyn(),
        );
        if let (Some(bias), Some(b_grad)) = (&mut self.bias, &mut self.b_grad) {
            f(
                &format!("{prefix}bias"),
                bias.view_mut().into_dyn(),
                b_grad.view_mut().into_dyn(),
            );
        }
    }
}
