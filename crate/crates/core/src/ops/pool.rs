use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Spatial mean per channel: `[N, C, H, W] -> [N, C]`.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4()?;
    let inv = T::ONE / T::from_usize(h * w);
    let out: Vec<T> = x.data().chunks_exact(h * w).map(|p| p.iter().copied().sum::<T>() * inv).collect();
    Tensor::new(&[n, c], out)
}

pub fn global_avg_pool_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let hw = input_shape[2] * input_shape[3];
    let inv = T::ONE / T::from_usize(hw);
    let mut out = vec![T::ZERO; grad_out.numel() * hw];
    for (plane, &g) in out.chunks_exact_mut(hw).zip(grad_out.data()) {
        plane.fill(g * inv);
    }
    Tensor::new(input_shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::rng::TestRng;

    #[test]
    fn constant_and_arithmetic_mean() {
        let y = global_avg_pool(&Tensor::<f64>::full(&[2, 3, 4, 4], 2.5)).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert!(y.data().iter().all(|&v| v == 2.5));
        let y = global_avg_pool(&Tensor::new(&[1, 1, 2, 2], vec![1.0f64, 3.0, 5.0, 7.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn matches_sum_oracle() {
        let mut rng = TestRng::new(12);
        let x = rng.tensor(&[2, 3, 5, 3]);
        let y = global_avg_pool(&x).unwrap();
        for i in 0..6 {
            let mut s = 0.0;
            for j in 0..15 {
                s += x.data()[i * 15 + j];
            }
            assert!((y.data()[i] - s / 15.0).abs() < 1e-7);
        }
    }
}
