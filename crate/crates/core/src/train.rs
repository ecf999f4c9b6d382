//! Mini-batch training loop and learning-rate schedules.
//!
//! The loop is independent of where samples come from: the caller supplies
//! a closure that materialises a batch for a list of item indices (and may
//! draw augmentation randomness from the shared generator), and an optional
//! per-epoch evaluation hook.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Model;
use crate::ops::argmax_rows;
use crate::optim::{AdamW, AdamWConfig};
use crate::scalar::Scalar;
use crate::tape::Graph;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine from the base rate to 0 over all steps, no warm-up.
    #[default]
    Cosine,
}

impl LrSchedule {
    /// Rate for zero-based `step` out of `total` steps.
    pub fn lr_at(self, base: f64, step: u64, total: u64) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine if total == 0 || step >= total => 0.0,
            LrSchedule::Cosine => 0.5 * base * (1.0 + libm::cos(core::f64::consts::PI * step as f64 / total as f64)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    pub optimizer: AdamWConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 400, batch_size: 16, seed: 0, schedule: LrSchedule::Cosine, optimizer: AdamWConfig::default() }
    }
}

impl TrainConfig {
    pub fn steps_per_epoch(&self, items: usize) -> u64 {
        items.div_ceil(self.batch_size.max(1)) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses.
    pub train_loss: f64,
    /// Accuracy of the training-mode predictions made while stepping.
    pub train_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_acc: Option<f64>,
    pub lr: f64,
}

/// Result of one optimisation step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    pub correct: usize,
}

/// Stacks `[C, H, W]` samples into `[N, C, H, W]`.
pub fn stack<T: Scalar>(samples: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = samples.first().ok_or_else(|| Error::usage("cannot stack an empty batch"))?;
    let mut shape = Vec::with_capacity(first.rank() + 1);
    shape.push(samples.len());
    shape.extend_from_slice(first.shape());
    let mut data = Vec::with_capacity(first.numel() * samples.len());
    for s in samples {
        first.expect_same_shape(s)?;
        data.extend_from_slice(s.data());
    }
    Tensor::new(&shape, data)
}

/// Forward, cross-entropy, backward and one AdamW update at rate `lr`.
pub fn train_step<T: Scalar>(
    model: &mut Model<T>,
    opt: &mut AdamW<T>,
    images: &Tensor<T>,
    labels: &[usize],
    lr: f64,
) -> Result<StepOutcome> {
    let mut g = Graph::new();
    let x = g.leaf(images.clone());
    let logits = model.forward(&mut g, x)?;
    let loss = g.cross_entropy(logits, labels)?;
    let pred = argmax_rows(g.value(logits));
    let correct = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    let loss_value = g.value(loss).data()[0].to_f64();
    model.params.zero_grad();
    g.backward(loss, &mut model.params)?;
    opt.step_with_lr(&mut model.params, lr)?;
    Ok(StepOutcome { loss: loss_value, correct })
}

/// Runs `config.epochs` epochs over `items` samples. `batch` receives the
/// item indices of one mini-batch; `evaluate` is called after every epoch
/// and may return a test accuracy. Fully deterministic given the seed and
/// deterministic callbacks.
pub fn train<T, B, E>(
    model: &mut Model<T>,
    config: &TrainConfig,
    items: usize,
    mut batch: B,
    mut evaluate: E,
) -> Result<Vec<EpochLog>>
where
    T: Scalar,
    B: FnMut(&[usize], &mut ChaCha8Rng) -> Result<(Tensor<T>, Vec<usize>)>,
    E: FnMut(&Model<T>, &EpochLog) -> Result<Option<f64>>,
{
    if config.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    if items == 0 && config.epochs > 0 {
        return Err(Error::usage("training set is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = AdamW::new(config.optimizer, &model.params);
    let total = config.steps_per_epoch(items) * config.epochs as u64;
    let mut step = 0u64;
    let mut log = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..items).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        let mut lr = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (images, labels) = batch(chunk, &mut rng)?;
            lr = config.schedule.lr_at(config.optimizer.lr, step, total);
            let out = train_step(model, &mut opt, &images, &labels, lr)?;
            loss_sum += out.loss * labels.len() as f64;
            correct += out.correct;
            seen += labels.len();
            step += 1;
        }
        let mut entry = EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / seen as f64,
            train_acc: correct as f64 / seen as f64,
            test_acc: None,
            lr,
        };
        entry.test_acc = evaluate(model, &entry)?;
        log.push(entry);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints() {
        let s = LrSchedule::Cosine;
        assert_eq!(s.lr_at(1.0, 0, 10), 1.0);
        assert!((s.lr_at(1.0, 5, 10) - 0.5).abs() < 1e-15);
        assert_eq!(s.lr_at(1.0, 10, 10), 0.0);
        assert_eq!(LrSchedule::Constant.lr_at(0.3, 7, 10), 0.3);
    }

    #[test]
    fn stack_checks_shapes() {
        let a = Tensor::<f32>::zeros(&[3, 2, 2]);
        let b = Tensor::<f32>::zeros(&[3, 2, 1]);
        assert_eq!(stack(&[a.clone(), a.clone()]).unwrap().shape(), &[2, 3, 2, 2]);
        assert!(stack(&[a, b]).is_err());
        assert!(stack::<f32>(&[]).is_err());
    }
}
