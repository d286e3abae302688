//! Decoding manifest records into pixel arrays.

use super::{ImageSample, ManifestRecord};
use crate::error::{Error, Result};
use crate::Real;
use image::DynamicImage;
use ndarray::Array3;
use std::path::Path;

/// Decode an image file into `H x W x C` reals in `[0, 1]`. 8- and 16-bit
/// grayscale stay single-channel; everything else becomes RGB.
pub fn load_image_pixels(path: &Path) -> Result<Array3<Real>> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })?;
    Ok(match img {
        DynamicImage::ImageLuma8(gray) => {
            let (w, h) = gray.dimensions();
            Array3::from_shape_fn((h as usize, w as usize, 1), |(y, x, _)| {
                gray.get_pixel(x as u32, y as u32).0[0] as Real / 255.0
            })
        }
        DynamicImage::ImageLuma16(gray) => {
            let (w, h) = gray.dimensions();
            Array3::from_shape_fn((h as usize, w as usize, 1), |(y, x, _)| {
                gray.get_pixel(x as u32, y as u32).0[0] as Real / 65535.0
            })
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            Array3::from_shape_fn((h as usize, w as usize, 3), |(y, x, c)| {
                rgb.get_pixel(x as u32, y as u32).0[c] as Real / 255.0
            })
        }
    })
}

/// Load the pixels for a manifest record rooted at `root`.
pub fn load_sample(root: &Path, record: &ManifestRecord) -> Result<ImageSample> {
    let pixels = load_image_pixels(&root.join(&record.path))?;
    ImageSample::new(
        record.sample_id.clone(),
        record.patient_id.clone(),
        pixels,
        record.label,
        record.provenance,
        record.source_domain,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma};
    use tempfile::TempDir;

    #[test]
    fn eight_bit_endpoints() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("x.png");
        let mut img = GrayImage::new(2, 1);
        img.put_pixel(0, 0, Luma([0]));
        img.put_pixel(1, 0, Luma([255]));
        img.save(&path).unwrap();
        let px = load_image_pixels(&path).unwrap();
        assert_eq!(px.dim(), (1, 2, 1));
        assert_eq!(px[[0, 0, 0]], 0.0);
        assert_eq!(px[[0, 1, 0]], 1.0);
    }
}
