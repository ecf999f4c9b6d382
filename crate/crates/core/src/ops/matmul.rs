use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `(batch, m, k, n)` for `a: [.., m, k]`, `b: [.., k, n]` with equal leading extents.
fn matmul_dims(a: &[usize], b: &[usize]) -> Result<(usize, usize, usize, usize)> {
    if a.len() < 2 || a.len() != b.len() {
        return Err(Error::config(format!("matmul needs equal-rank operands of rank >= 2, got {a:?} and {b:?}")));
    }
    let r = a.len();
    if a[..r - 2] != b[..r - 2] {
        return Err(Error::config(format!("matmul batch extents differ: {a:?} vs {b:?}")));
    }
    if a[r - 1] != b[r - 2] {
        return Err(Error::config(format!("matmul inner extents differ: {a:?} vs {b:?}")));
    }
    Ok((a[..r - 2].iter().product(), a[r - 2], a[r - 1], b[r - 1]))
}

fn gemm_into<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            for (o, &bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
}

pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, m, k, n) = matmul_dims(a.shape(), b.shape())?;
    let mut out = vec![T::ZERO; batch * m * n];
    for bi in 0..batch {
        gemm_into(
            &a.data()[bi * m * k..(bi + 1) * m * k],
            &b.data()[bi * k * n..(bi + 1) * k * n],
            &mut out[bi * m * n..(bi + 1) * m * n],
            m,
            k,
            n,
        );
    }
    let mut shape: Vec<usize> = a.shape().to_vec();
    *shape.last_mut().unwrap() = n;
    Tensor::new(&shape, out)
}

/// Swaps the two trailing axes.
pub fn transpose_last2<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let r = x.rank();
    if r < 2 {
        return Err(Error::config(format!("transpose needs rank >= 2, got {:?}", x.shape())));
    }
    let (rows, cols) = (x.shape()[r - 2], x.shape()[r - 1]);
    let batch = x.numel() / (rows * cols);
    let mut out = vec![T::ZERO; x.numel()];
    let src = x.data();
    for b in 0..batch {
        let base = b * rows * cols;
        for i in 0..rows {
            for j in 0..cols {
                out[base + j * rows + i] = src[base + i * cols + j];
            }
        }
    }
    let mut shape = x.shape().to_vec();
    shape.swap(r - 2, r - 1);
    Tensor::new(&shape, out)
}

/// `(dA, dB) = (G Bᵀ, Aᵀ G)`.
pub fn matmul_backward<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let da = matmul(grad_out, &transpose_last2(b)?)?;
    let db = matmul(&transpose_last2(a)?, grad_out)?;
    Ok((da, db))
}
