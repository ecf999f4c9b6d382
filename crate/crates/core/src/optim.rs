//! AdamW with decoupled weight decay.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 5e-4, weight_decay: 0.05, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Optimiser state: one first/second moment pair per parameter, in store
/// order, and the number of steps taken.
#[derive(Clone, Debug)]
pub struct AdamW<T = f32> {
    pub config: AdamWConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(config: AdamWConfig, store: &ParamStore<T>) -> Self {
        let m: Vec<_> = store.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self { config, v: m.clone(), m, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self, index: usize) -> Option<(&Tensor<T>, &Tensor<T>)> {
        Some((self.m.get(index)?, self.v.get(index)?))
    }

    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        self.step_with_lr(store, self.config.lr)
    }

    /// One update at learning rate `lr` using the gradients accumulated in
    /// `store`.
    pub fn step_with_lr(&mut self, store: &mut ParamStore<T>, lr: f64) -> Result<()> {
        if store.len() != self.m.len() {
            return Err(Error::usage(format!(
                "optimiser tracks {} parameters but the store has {}",
                self.m.len(),
                store.len()
            )));
        }
        for (p, m) in store.iter().zip(&self.m) {
            if p.grad.shape() != m.shape() || p.value.shape() != m.shape() {
                return Err(Error::usage(format!("no gradient of shape {:?} for parameter {}", m.shape(), p.name)));
            }
        }
        let AdamWConfig { weight_decay, beta1, beta2, eps, .. } = self.config;
        self.t += 1;
        let bc1 = 1.0 - libm::pow(beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(beta2, self.t as f64);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let theta = p.value.data_mut();
            for (i, &g) in p.grad.data().iter().enumerate() {
                let g = g.to_f64();
                let mi = beta1 * m.data()[i].to_f64() + (1.0 - beta1) * g;
                let vi = beta2 * v.data()[i].to_f64() + (1.0 - beta2) * g * g;
                m.data_mut()[i] = T::from_f64(mi);
                v.data_mut()[i] = T::from_f64(vi);
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                let th = theta[i].to_f64();
                theta[i] = T::from_f64(th - lr * weight_decay * th - lr * m_hat / (libm::sqrt(v_hat) + eps));
            }
        }
        Ok(())
    }
}
