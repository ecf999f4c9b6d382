//! Global response normalization over `[N, C, H, W]`:
//! `G_c = ||x_c||_2` over spatial positions, `N_c = G_c / (mean_c G + eps)`,
//! `out = gamma_c * (x * N_c) + beta_c + x`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const GRN_EPSILON: f64 = 1e-6;

/// Learnable GRN state for a tensor with `gamma.len()` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct GrnParams<T = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub epsilon: T,
}

impl<T: Scalar> GrnParams<T> {
    /// Zero gamma/beta: the identity map.
    pub fn identity(channels: usize) -> Self {
        Self { gamma: Tensor::zeros(&[channels]), beta: Tensor::zeros(&[channels]), epsilon: T::from_f64(GRN_EPSILON) }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.gamma.shape() != [channels] || self.beta.shape() != [channels] {
            return Err(Error::config(format!(
                "GRN over {channels} channels got gamma {:?} / beta {:?}",
                self.gamma.shape(),
                self.beta.shape()
            )));
        }
        // written negated so that NaN is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.epsilon > T::ZERO) {
            return Err(Error::config("GRN epsilon must be positive"));
        }
        Ok(())
    }
}

/// Per-sample, per-channel spatial L2 norms, laid out `[n * C + c]`.
fn channel_norms<T: Scalar>(x: &[T], n: usize, c: usize, hw: usize) -> Vec<T> {
    x.chunks_exact(hw).take(n * c).map(|plane| plane.iter().map(|&v| v * v).sum::<T>().sqrt()).collect()
}

pub fn grn<T: Scalar>(x: &Tensor<T>, p: &GrnParams<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4()?;
    p.validate(c)?;
    let hw = h * w;
    let norms = channel_norms(x.data(), n, c, hw);
    let (gamma, beta) = (p.gamma.data(), p.beta.data());
    let mut out = vec![T::ZERO; x.numel()];
    for s in 0..n {
        let g = &norms[s * c..(s + 1) * c];
        let denom = g.iter().copied().sum::<T>() / T::from_usize(c) + p.epsilon;
        for ch in 0..c {
            let scale = gamma[ch] * (g[ch] / denom);
            let off = (s * c + ch) * hw;
            for (o, &v) in out[off..off + hw].iter_mut().zip(&x.data()[off..off + hw]) {
                *o = scale * v + beta[ch] + v;
            }
        }
    }
    Tensor::new(x.shape(), out)
}

pub struct GrnGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

pub fn grn_backward<T: Scalar>(x: &Tensor<T>, p: &GrnParams<T>, grad_out: &Tensor<T>) -> Result<GrnGrads<T>> {
    let [n, c, h, w] = x.dims4()?;
    p.validate(c)?;
    x.expect_same_shape(grad_out)?;
    let hw = h * w;
    let xd = x.data();
    let gd = grad_out.data();
    let gamma = p.gamma.data();
    let norms = channel_norms(xd, n, c, hw);
    let mut dx = vec![T::ZERO; x.numel()];
    let mut dgamma = vec![T::ZERO; c];
    let mut dbeta = vec![T::ZERO; c];
    let cf = T::from_usize(c);

    for s in 0..n {
        let g = &norms[s * c..(s + 1) * c];
        let denom = g.iter().copied().sum::<T>() / cf + p.epsilon;
        // a_c = dL/dN_c
        let mut a = vec![T::ZERO; c];
        for ch in 0..c {
            let off = (s * c + ch) * hw;
            let (xs, gs) = (&xd[off..off + hw], &gd[off..off + hw]);
            let gx: T = xs.iter().zip(gs).map(|(&xv, &gv)| xv * gv).sum();
            let nc = g[ch] / denom;
            a[ch] = gamma[ch] * gx;
            dgamma[ch] += gx * nc;
            dbeta[ch] += gs.iter().copied().sum::<T>();
        }
        let coupling: T = a.iter().zip(g).map(|(&ac, &gc)| ac * gc).sum::<T>() / (denom * denom * cf);
        for ch in 0..c {
            let off = (s * c + ch) * hw;
            let nc = g[ch] / denom;
            let direct = T::ONE + gamma[ch] * nc;
            let d_norm = a[ch] / denom - coupling;
            // d||x||/dx = x/||x||, taken as 0 at the origin
            let via_norm = if g[ch] > T::ZERO { d_norm / g[ch] } else { T::ZERO };
            for i in off..off + hw {
                dx[i] = gd[i] * direct + via_norm * xd[i];
            }
        }
    }
    Ok(GrnGrads {
        input: Tensor::new(x.shape(), dx)?,
        gamma: Tensor::new(&[c], dgamma)?,
        beta: Tensor::new(&[c], dbeta)?,
    })
}
