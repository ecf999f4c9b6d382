use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle into a [`ParamStore`]; stable for the lifetime of the store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T = f32> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Flat, ordered registry of every learnable tensor in a model. Order is the
/// registration order, which is deterministic for a given configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T = f32> {
    params: Vec<Parameter<T>>,
    index: BTreeMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new(), index: BTreeMap::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::config(format!("duplicate parameter name `{name}`")));
        }
        let grad = Tensor::zeros(value.shape());
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Parameter { name, value, grad });
        Ok(ParamId(self.params.len() - 1))
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    /// Overwrites a parameter value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor<T>) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::config(format!(
                "parameter `{}` has shape {:?}, got {:?}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::ZERO);
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter { name: p.name.clone(), value: p.value.cast(), grad: p.grad.cast() })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Fills every parameter, including biases and GRN scales, with
    /// uniform values in `[-scale, scale)`. Used to exercise blocks away
    /// from their identity initialisation.
    pub fn randomize(&mut self, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.params {
            for v in p.value.data_mut() {
                *v = T::from_f64(rng.random_range(-scale..scale));
            }
        }
    }
}

/// Deterministic weight initialiser: truncated normal (std 0.02, cut at ±2σ)
/// for kernels, zeros for biases and GRN scales.
pub struct Initializer {
    rng: ChaCha8Rng,
    pub std: f64,
}

impl Initializer {
    pub const DEFAULT_STD: f64 = 0.02;

    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), std: Self::DEFAULT_STD }
    }

    pub fn truncated_normal<T: Scalar>(&mut self, shape: &[usize]) -> Tensor<T> {
        let std = self.std;
        let rng = &mut self.rng;
        Tensor::from_fn(shape, |_| loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= 2.0 {
                break T::from_f64(z * std);
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::<f32>::new();
        s.register("a.weight", Tensor::zeros(&[2])).unwrap();
        assert!(matches!(s.register("a.weight", Tensor::zeros(&[3])), Err(Error::Config(_))));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn grad_matches_value_shape() {
        let mut s = ParamStore::<f64>::new();
        let id = s.register("w", Tensor::full(&[2, 3], 1.0)).unwrap();
        assert_eq!(s.get(id).grad.shape(), &[2, 3]);
        assert!(s.set_value(id, Tensor::zeros(&[3, 2])).is_err());
        assert_eq!(s.num_scalars(), 6);
    }

    #[test]
    fn truncated_normal_bounds_and_determinism() {
        let a: Tensor<f64> = Initializer::new(5).truncated_normal(&[1000]);
        let b: Tensor<f64> = Initializer::new(5).truncated_normal(&[1000]);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| v.abs() <= 0.04));
        let mean = a.sum() / 1000.0;
        assert!(mean.abs() < 0.005);
    }
}
