//! 8-bit RGB to the network's normalised `[3, H, W]` input.

use alloc::format;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// ImageNet channel statistics.
pub const MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const STD: [f64; 3] = [0.229, 0.224, 0.225];

/// `rgb` is interleaved row-major `height × width × 3`. With `flip` the
/// columns are mirrored.
pub fn normalize_rgb<T: Scalar>(rgb: &[u8], width: usize, height: usize, flip: bool) -> Result<Tensor<T>> {
    if width == 0 || height == 0 || rgb.len() != width * height * 3 {
        return Err(Error::usage(format!(
            "expected {width}x{height}x3 = {} bytes, got {}",
            width * height * 3,
            rgb.len()
        )));
    }
    let plane = width * height;
    Ok(Tensor::from_fn(&[3, height, width], |i| {
        let (c, p) = (i / plane, i % plane);
        let (y, x) = (p / width, p % width);
        let sx = if flip { width - 1 - x } else { x };
        let v = rgb[(y * width + sx) * 3 + c] as f64 / 255.0;
        T::from_f64((v - MEAN[c]) / STD[c])
    }))
}
