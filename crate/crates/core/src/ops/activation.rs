use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
// 1 / sqrt(2π)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    half * (T::ONE + (x * T::from_f64(FRAC_1_SQRT_2)).erf())
}

/// Exact GELU, `x * Φ(x)`.
#[inline]
pub fn gelu_scalar<T: Scalar>(x: T) -> T {
    x * normal_cdf(x)
}

/// `d/dx [x Φ(x)] = Φ(x) + x φ(x)`.
#[inline]
pub fn gelu_grad_scalar<T: Scalar>(x: T) -> T {
    let pdf = T::from_f64(INV_SQRT_2PI) * (-(x * x) * T::from_f64(0.5)).exp();
    normal_cdf(x) + x * pdf
}

/// A pointwise activation as a pair of `f64` functions. The tape evaluates
/// its activation nodes through one of these so a verification harness can
/// swap in a deliberately wrong implementation and confirm it is caught.
#[derive(Clone, Copy, Debug)]
pub struct Activation {
    pub value: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
}

impl Activation {
    pub const GELU: Self = Self { value: gelu_scalar::<f64>, derivative: gelu_grad_scalar::<f64> };

    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| T::from_f64((self.value)(v.to_f64())))
    }

    pub fn backward<T: Scalar>(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        x.zip_map(grad_out, |v, g| g * T::from_f64((self.derivative)(v.to_f64())))
    }
}

impl Default for Activation {
    fn default() -> Self {
        Self::GELU
    }
}

pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(gelu_scalar)
}

pub fn gelu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    x.zip_map(grad_out, |v, g| g * gelu_grad_scalar(v)).expect("gelu gradient shape")
}
