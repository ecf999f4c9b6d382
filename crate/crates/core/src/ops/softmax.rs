use alloc::vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Softmax along the last axis, with the row maximum subtracted first.
pub fn softmax_last<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let k = *x.shape().last().expect("tensor rank >= 1");
    let mut out = vec![T::ZERO; x.numel()];
    for (row, dst) in x.data().chunks_exact(k).zip(out.chunks_exact_mut(k)) {
        let m = row.iter().copied().fold(row[0], T::max);
        let mut total = T::ZERO;
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - m).exp();
            total += *d;
        }
        for d in dst.iter_mut() {
            *d /= total;
        }
    }
    Tensor::new(x.shape(), out).expect("softmax preserves shape")
}

/// Softmax along `axis`; non-last axes go through a permutation.
pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let rank = x.rank();
    if axis >= rank {
        return Err(Error::config(alloc::format!("softmax axis {axis} out of range for rank {rank}")));
    }
    if axis == rank - 1 {
        return Ok(softmax_last(x));
    }
    let shape = x.shape();
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = x.data().to_vec();
    let mut row = vec![T::ZERO; len];
    for o in 0..outer {
        for i in 0..inner {
            for (j, r) in row.iter_mut().enumerate() {
                *r = out[(o * len + j) * inner + i];
            }
            let s = softmax_last(&Tensor::new(&[len], row.clone())?);
            for (j, &v) in s.data().iter().enumerate() {
                out[(o * len + j) * inner + i] = v;
            }
        }
    }
    Tensor::new(shape, out)
}

/// Given `y = softmax_last(x)` and `dL/dy`, returns `dL/dx = y ⊙ (g − <g, y>)`.
pub fn softmax_last_backward<T: Scalar>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let k = *y.shape().last().expect("tensor rank >= 1");
    let mut out = vec![T::ZERO; y.numel()];
    for ((ys, gs), dst) in y.data().chunks_exact(k).zip(grad_out.data().chunks_exact(k)).zip(out.chunks_exact_mut(k)) {
        let dot: T = ys.iter().zip(gs).map(|(&a, &b)| a * b).sum();
        for ((d, &yv), &gv) in dst.iter_mut().zip(ys).zip(gs) {
            *d = yv * (gv - dot);
        }
    }
    Tensor::new(y.shape(), out).expect("softmax gradient preserves shape")
}
