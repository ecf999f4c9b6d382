use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::softmax::softmax_last;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn check_labels<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(usize, usize)> {
    let (n, k) = match logits.shape() {
        &[n, k] => (n, k),
        s => return Err(Error::usage(format!("cross-entropy expects logits [N,K], got {s:?}"))),
    };
    if labels.len() != n {
        return Err(Error::usage(format!("{} labels for a batch of {n}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::usage(format!("label {bad} out of range for {k} classes")));
    }
    Ok((n, k))
}

/// Mean over the batch of `-log softmax(logits)[label]`, via log-sum-exp.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<T> {
    let (n, k) = check_labels(logits, labels)?;
    let mut total = T::ZERO;
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let m = row.iter().copied().fold(row[0], T::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
        total += lse - row[label];
    }
    Ok(total / T::from_usize(n))
}

/// `d loss / d logits = (softmax − onehot) / N`, scaled by the upstream scalar.
pub fn cross_entropy_backward<T: Scalar>(logits: &Tensor<T>, labels: &[usize], upstream: T) -> Result<Tensor<T>> {
    let (n, k) = check_labels(logits, labels)?;
    let mut g: Vec<T> = softmax_last(logits).into_data();
    let scale = upstream / T::from_usize(n);
    for (row, &label) in g.chunks_exact_mut(k).zip(labels) {
        row[label] -= T::ONE;
        row.iter_mut().for_each(|v| *v *= scale);
    }
    Tensor::new(&[n, k], g)
}

/// Index of the largest logit per row (first one on ties).
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let k = *logits.shape().last().expect("rank >= 1");
    logits
        .data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
