//! Decode → bilinear resize to 256² (scaled with the input size) → centre
//! crop → optional horizontal flip → ImageNet normalisation.

use std::path::Path;

use dfeia_core::pixels::normalize_rgb;
use dfeia_core::Tensor;
use image::imageops::{self, FilterType};
use image::RgbImage;

use crate::error::{DfeiaError, Result};

/// Side of the square the image is resized to before cropping:
/// 256 for the standard 224 input.
pub fn resize_side(input_size: usize) -> usize {
    (input_size * 256 + 112) / 224
}

pub fn decode(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|source| DfeiaError::Decode { path: path.into(), source })?;
    Ok(img.to_rgb8())
}

/// Resized and centre-cropped pixels, `input_size²` interleaved RGB. This
/// is the deterministic part of preprocessing and can be cached.
pub fn resize_and_crop(img: &RgbImage, input_size: usize) -> Vec<u8> {
    let side = resize_side(input_size) as u32;
    let resized = imageops::resize(img, side, side, FilterType::Triangle);
    let off = (side - input_size as u32) / 2;
    imageops::crop_imm(&resized, off, off, input_size as u32, input_size as u32).to_image().into_raw()
}

/// `[3, input_size, input_size]`.
pub fn preprocess(img: &RgbImage, input_size: usize, flip: bool) -> Result<Tensor<f32>> {
    let pixels = resize_and_crop(img, input_size);
    Ok(normalize_rgb(&pixels, input_size, input_size, flip)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dfeia_core::pixels::{MEAN, STD};
    use image::Rgb;

    #[test]
    fn solid_colour_any_size() {
        for (w, h) in [(1, 1), (3, 500), (640, 480)] {
            let img = RgbImage::from_pixel(w, h, Rgb([20, 120, 220]));
            let t = preprocess(&img, 224, false).unwrap();
            assert_eq!(t.shape(), &[3, 224, 224]);
            for c in 0..3 {
                let want = ([20.0, 120.0, 220.0][c] / 255.0 - MEAN[c]) / STD[c];
                let plane = &t.data()[c * 224 * 224..(c + 1) * 224 * 224];
                assert!(plane.iter().all(|&v| (v as f64 - want).abs() < 1e-6), "{w}x{h} channel {c}");
            }
        }
    }

    #[test]
    fn resize_side_scales_with_input() {
        assert_eq!(resize_side(224), 256);
        assert_eq!(resize_side(32), 37);
    }

    #[test]
    fn flip_mirrors_columns_exactly() {
        let img = RgbImage::from_fn(256, 256, |x, y| Rgb([x as u8, y as u8, (x ^ y) as u8]));
        let a = preprocess(&img, 224, false).unwrap();
        let b = preprocess(&img, 224, true).unwrap();
        for c in 0..3 {
            for y in 0..224 {
                for x in 0..224 {
                    let i = (c * 224 + y) * 224;
                    assert_eq!(a.data()[i + x], b.data()[i + 223 - x]);
                }
            }
        }
        // 256² input is cropped without resampling: column x of the crop is source column x+16
        let expected = ((16.0 + 5.0) / 255.0 - MEAN[0]) / STD[0];
        assert!((a.data()[5] as f64 - expected).abs() < 1e-6);
    }
}
