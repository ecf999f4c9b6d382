//! Channel-axis slicing and concatenation on `[N, C, H, W]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn slice_channels<T: Scalar>(x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4()?;
    if len == 0 || start + len > c {
        return Err(Error::config(format!("channel slice {start}..{} out of range for C={c}", start + len)));
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(n * len * hw);
    for s in 0..n {
        let base = (s * c + start) * hw;
        out.extend_from_slice(&x.data()[base..base + len * hw]);
    }
    Tensor::new(&[n, len, h, w], out)
}

pub fn concat_channels<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts.first().ok_or_else(|| Error::config("concat of zero tensors"))?;
    let [n, _, h, w] = first.dims4()?;
    let mut total_c = 0;
    for p in parts {
        let [pn, pc, ph, pw] = p.dims4()?;
        if (pn, ph, pw) != (n, h, w) {
            return Err(Error::config(format!(
                "concat along channels needs matching N,H,W: {:?} vs {:?}",
                first.shape(),
                p.shape()
            )));
        }
        total_c += pc;
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(n * total_c * hw);
    for s in 0..n {
        for p in parts {
            let pc = p.shape()[1];
            out.extend_from_slice(&p.data()[s * pc * hw..(s + 1) * pc * hw]);
        }
    }
    Tensor::new(&[n, total_c, h, w], out)
}

/// Adjoint of [`slice_channels`]: scatter into a zero tensor of `full_shape`.
pub fn slice_channels_backward<T: Scalar>(
    full_shape: &[usize],
    start: usize,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (n, c, hw) = (full_shape[0], full_shape[1], full_shape[2] * full_shape[3]);
    let len = grad_out.shape()[1];
    let mut out = Tensor::zeros(full_shape);
    for s in 0..n {
        let dst = (s * c + start) * hw;
        out.data_mut()[dst..dst + len * hw].copy_from_slice(&grad_out.data()[s * len * hw..(s + 1) * len * hw]);
    }
    Ok(out)
}
