//! Single-level orthonormal 2-D Haar transform, applied per channel.
//!
//! Each non-overlapping 2×2 block `[[a, b], [c, d]]` maps to
//!
//! ```text
//! LL = (a + b + c + d) / 2     LH = (a + b - c - d) / 2
//! HL = (a - b + c - d) / 2     HH = (a - b - c + d) / 2
//! ```
//!
//! The 4×4 block matrix is symmetric and orthogonal, so it is its own
//! inverse and its own adjoint: the backward pass of [`dwt2`] is [`idwt2`]
//! and vice versa.

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// The four half-resolution components of [`dwt2`], each `[N, C, H/2, W/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubbandSet<T = f32> {
    pub ll: Tensor<T>,
    pub lh: Tensor<T>,
    pub hl: Tensor<T>,
    pub hh: Tensor<T>,
}

impl<T: Scalar> SubbandSet<T> {
    pub fn shape(&self) -> &[usize] {
        self.ll.shape()
    }

    pub fn energy(&self) -> T {
        self.ll.sum_squares() + self.lh.sum_squares() + self.hl.sum_squares() + self.hh.sum_squares()
    }

    fn check(&self) -> Result<[usize; 4]> {
        let dims = self.ll.dims4()?;
        for (name, t) in [("LH", &self.lh), ("HL", &self.hl), ("HH", &self.hh)] {
            if t.shape() != self.ll.shape() {
                return Err(Error::config(format!(
                    "subband {name} has shape {:?}, LL has {:?}",
                    t.shape(),
                    self.ll.shape()
                )));
            }
        }
        Ok(dims)
    }
}

#[inline]
fn butterfly<T: Scalar>(a: T, b: T, c: T, d: T) -> [T; 4] {
    let half = T::from_f64(0.5);
    [(a + b + c + d) * half, ((a + b) - (c + d)) * half, ((a + c) - (b + d)) * half, (a - b - c + d) * half]
}

fn check_even(shape: &[usize]) -> Result<[usize; 4]> {
    let [n, c, h, w] = match shape {
        &[n, c, h, w] => [n, c, h, w],
        _ => return Err(Error::config(format!("wavelet transform needs [N,C,H,W], got {shape:?}"))),
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::config(format!("wavelet transform needs even H and W, got {h}x{w}")));
    }
    Ok([n, c, h, w])
}

/// Forward transform into a single `[N, 4C, H/2, W/2]` tensor whose channel
/// blocks are `LL | LH | HL | HH`. This is the layout the tape records.
pub fn dwt2_packed<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = check_even(x.shape())?;
    let (h2, w2) = (h / 2, w / 2);
    let plane = h2 * w2;
    let src = x.data();
    let mut out = vec![T::ZERO; x.numel()];
    for s in 0..n {
        for ch in 0..c {
            let xin = &src[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
            let band = |k: usize| ((s * 4 + k) * c + ch) * plane;
            let offs = [band(0), band(1), band(2), band(3)];
            for i in 0..h2 {
                for j in 0..w2 {
                    let a = xin[2 * i * w + 2 * j];
                    let b = xin[2 * i * w + 2 * j + 1];
                    let cc = xin[(2 * i + 1) * w + 2 * j];
                    let d = xin[(2 * i + 1) * w + 2 * j + 1];
                    for (k, v) in butterfly(a, b, cc, d).into_iter().enumerate() {
                        out[offs[k] + i * w2 + j] = v;
                    }
                }
            }
        }
    }
    Tensor::new(&[n, 4 * c, h2, w2], out)
}

/// Inverse of [`dwt2_packed`].
pub fn idwt2_packed<T: Scalar>(packed: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c4, h2, w2] = packed.dims4()?;
    if c4 % 4 != 0 {
        return Err(Error::config(format!("packed subbands need 4C channels, got {c4}")));
    }
    let c = c4 / 4;
    let (h, w) = (2 * h2, 2 * w2);
    let plane = h2 * w2;
    let src = packed.data();
    let mut out = vec![T::ZERO; packed.numel()];
    for s in 0..n {
        for ch in 0..c {
            let band = |k: usize| ((s * 4 + k) * c + ch) * plane;
            let offs = [band(0), band(1), band(2), band(3)];
            let dst = &mut out[(s * c + ch) * h * w..(s * c + ch + 1) * h * w];
            for i in 0..h2 {
                for j in 0..w2 {
                    let p = i * w2 + j;
                    let [a, b, cc, d] =
                        butterfly(src[offs[0] + p], src[offs[1] + p], src[offs[2] + p], src[offs[3] + p]);
                    dst[2 * i * w + 2 * j] = a;
                    dst[2 * i * w + 2 * j + 1] = b;
                    dst[(2 * i + 1) * w + 2 * j] = cc;
                    dst[(2 * i + 1) * w + 2 * j + 1] = d;
                }
            }
        }
    }
    Tensor::new(&[n, c, h, w], out)
}

pub fn dwt2<T: Scalar>(x: &Tensor<T>) -> Result<SubbandSet<T>> {
    let packed = dwt2_packed(x)?;
    let c = x.shape()[1];
    let take = |k: usize| crate::ops::slice_channels(&packed, k * c, c);
    Ok(SubbandSet { ll: take(0)?, lh: take(1)?, hl: take(2)?, hh: take(3)? })
}

pub fn idwt2<T: Scalar>(s: &SubbandSet<T>) -> Result<Tensor<T>> {
    s.check()?;
    let packed = crate::ops::concat_channels(&[&s.ll, &s.lh, &s.hl, &s.hh])?;
    idwt2_packed(&packed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::oracle;
    use crate::verify::rng::TestRng;

    #[test]
    fn constant_block_has_no_detail() {
        let s = dwt2(&Tensor::<f64>::full(&[1, 1, 2, 2], 3.0)).unwrap();
        assert_eq!(s.ll.data(), &[6.0]);
        assert_eq!((s.lh.data(), s.hl.data(), s.hh.data()), (&[0.0][..], &[0.0][..], &[0.0][..]));
    }

    #[test]
    fn one_two_three_four() {
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let s = dwt2(&x).unwrap();
        assert_eq!(s.ll.data(), &[5.0]);
        assert_eq!(s.lh.data(), &[-2.0]);
        assert_eq!(s.hl.data(), &[-1.0]);
        assert_eq!(s.hh.data(), &[0.0]);
        assert_eq!(x.sum_squares(), 30.0);
        assert_eq!(s.energy(), 30.0);
        // independent 4×4 transform matrix
        let m = oracle::haar_block_matrix();
        let want = oracle::apply_block_matrix(&m, [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(want, [5.0, -2.0, -1.0, 0.0]);
    }

    #[test]
    fn inverse_of_simple_cases() {
        let zero = SubbandSet {
            ll: Tensor::<f64>::zeros(&[1, 2, 3, 3]),
            lh: Tensor::zeros(&[1, 2, 3, 3]),
            hl: Tensor::zeros(&[1, 2, 3, 3]),
            hh: Tensor::zeros(&[1, 2, 3, 3]),
        };
        assert_eq!(idwt2(&zero).unwrap(), Tensor::zeros(&[1, 2, 6, 6]));
        let mut constant = zero.clone();
        constant.ll = Tensor::full(&[1, 2, 3, 3], 2.0 * 1.25);
        assert_eq!(idwt2(&constant).unwrap(), Tensor::full(&[1, 2, 6, 6], 1.25));
    }

    #[test]
    fn perfect_reconstruction_both_ways() {
        let mut rng = TestRng::new(17);
        let x = rng.tensor(&[2, 3, 8, 8]);
        let back = idwt2(&dwt2(&x).unwrap()).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-12);
        let s = SubbandSet {
            ll: rng.tensor(&[2, 3, 4, 4]),
            lh: rng.tensor(&[2, 3, 4, 4]),
            hl: rng.tensor(&[2, 3, 4, 4]),
            hh: rng.tensor(&[2, 3, 4, 4]),
        };
        let again = dwt2(&idwt2(&s).unwrap()).unwrap();
        for (a, b) in [(&again.ll, &s.ll), (&again.lh, &s.lh), (&again.hl, &s.hl), (&again.hh, &s.hh)] {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
        // f32 path
        let x32: Tensor<f32> = x.cast();
        assert!(idwt2(&dwt2(&x32).unwrap()).unwrap().max_abs_diff(&x32) < 1e-6);
    }

    #[test]
    fn matches_block_matrix_oracle() {
        let mut rng = TestRng::new(23);
        let x = rng.tensor(&[1, 2, 4, 6]);
        let s = dwt2(&x).unwrap();
        let want = oracle::dwt2_via_matrix(&x);
        assert!(s.ll.max_abs_diff(&want.ll) < 1e-14);
        assert!(s.lh.max_abs_diff(&want.lh) < 1e-14);
        assert!(s.hl.max_abs_diff(&want.hl) < 1e-14);
        assert!(s.hh.max_abs_diff(&want.hh) < 1e-14);
    }

    #[test]
    fn odd_sizes_and_mismatched_bands_rejected() {
        assert!(matches!(dwt2(&Tensor::<f32>::zeros(&[1, 1, 3, 4])), Err(Error::Config(_))));
        assert!(dwt2(&Tensor::<f32>::zeros(&[1, 1, 4, 5])).is_err());
        let bad = SubbandSet {
            ll: Tensor::<f32>::zeros(&[1, 1, 2, 2]),
            lh: Tensor::zeros(&[1, 1, 2, 2]),
            hl: Tensor::zeros(&[1, 1, 2, 3]),
            hh: Tensor::zeros(&[1, 1, 2, 2]),
        };
        assert!(idwt2(&bad).is_err());
    }
}
