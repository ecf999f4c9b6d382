use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn linear_dims<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match (x.shape(), weight.shape(), bias.shape()) {
        (&[n, f], &[k, f2], &[k2]) if f == f2 && k == k2 => Ok((n, f, k)),
        (xs, ws, bs) => {
            Err(Error::config(format!("linear expects x [N,F], weight [K,F], bias [K]; got {xs:?}, {ws:?}, {bs:?}")))
        }
    }
}

/// `y = x Wᵀ + b`.
pub fn linear<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, f, k) = linear_dims(x, weight, bias)?;
    let mut out = vec![T::ZERO; n * k];
    for i in 0..n {
        let xr = &x.data()[i * f..(i + 1) * f];
        for j in 0..k {
            let wr = &weight.data()[j * f..(j + 1) * f];
            out[i * k + j] = bias.data()[j] + xr.iter().zip(wr).map(|(&a, &b)| a * b).sum::<T>();
        }
    }
    Tensor::new(&[n, k], out)
}

pub struct LinearGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<LinearGrads<T>> {
    let (n, f, k) = linear_dims(x, weight, bias)?;
    let g = grad_out.data();
    let mut dx = vec![T::ZERO; n * f];
    let mut dw = vec![T::ZERO; k * f];
    let mut db = vec![T::ZERO; k];
    for i in 0..n {
        let xr = &x.data()[i * f..(i + 1) * f];
        for j in 0..k {
            let gv = g[i * k + j];
            db[j] += gv;
            let wr = &weight.data()[j * f..(j + 1) * f];
            for p in 0..f {
                dx[i * f + p] += gv * wr[p];
                dw[j * f + p] += gv * xr[p];
            }
        }
    }
    Ok(LinearGrads {
        input: Tensor::new(&[n, f], dx)?,
        weight: Tensor::new(&[k, f], dw)?,
        bias: Tensor::new(&[k], db)?,
    })
}
