//! Preprocessing: bilinear resize to the working resolution, single-channel
//! collapse, and `[0, 1]` clamping.

use super::ImageSample;
use crate::error::{Error, Result};
use crate::Real;
use ndarray::Array3;

/// Default working resolution for real chest-radiograph tasks.
pub const PREPROCESS_SIZE: usize = 256;

/// Resize to the default 256 x 256 single-channel representation.
pub fn preprocess(sample: &ImageSample) -> Result<ImageSample> {
    preprocess_to(sample, PREPROCESS_SIZE)
}

/// Resize to `size x size`, collapsing RGB to luma. Values stay in `[0, 1]`;
/// constant images stay constant; applying this twice is a fixed point up to
/// resampling tolerance.
pub fn preprocess_to(sample: &ImageSample, size: usize) -> Result<ImageSample> {
    let (h, w, c) = sample.pixels.dim();
    if h == 0 || w == 0 || size == 0 {
        return Err(Error::InvalidSpec("zero-area image".into()));
    }
    let gray = to_gray(&sample.pixels, h, w, c);
    let resized = bilinear_resize(&gray, size, size);
    let mut out = sample.clone();
    out.pixels = resized.mapv(|v| v.clamp(0.0, 1.0));
    Ok(out)
}

fn to_gray(pixels: &Array3<Real>, h: usize, w: usize, c: usize) -> Array3<Real> {
    if c == 1 {
        return pixels.clone();
    }
    let mut gray = Array3::zeros((h, w, 1));
    if c == 3 {
        // ITU-R BT.601 luma.
        for y in 0..h {
            for x in 0..w {
                gray[[y, x, 0]] = 0.299 * pixels[[y, x, 0]]
                    + 0.587 * pixels[[y, x, 1]]
                    + 0.114 * pixels[[y, x, 2]];
            }
        }
    } else {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ci in 0..c {
                    acc += pixels[[y, x, ci]];
                }
                gray[[y, x, 0]] = acc / c as Real;
            }
        }
    }
    gray
}

/// Bilinear resampling with half-pixel centers; the identity when the size is
/// unchanged, and a convex combination of inputs otherwise (so constants and
/// the `[0, 1]` range are preserved).
pub fn bilinear_resize(src: &Array3<Real>, out_h: usize, out_w: usize) -> Array3<Real> {
    let (h, w, c) = src.dim();
    if h == out_h && w == out_w {
        return src.clone();
    }
    let mut dst = Array3::zeros((out_h, out_w, c));
    let scale_y = h as f64 / out_h as f64;
    let scale_x = w as f64 / out_w as f64;
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = (sy - y0 as f64) as Real;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = (sx - x0 as f64) as Real;
            for ci in 0..c {
                let top = src[[y0, x0, ci]] * (1.0 - fx) + src[[y0, x1, ci]] * fx;
                let bottom = src[[y1, x0, ci]] * (1.0 - fx) + src[[y1, x1, ci]] * fx;
                dst[[oy, ox, ci]] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    dst
}
