use std::time::Instant;

use dfeia_core::network::{Model, NetworkConfig};
use dfeia_core::ops::cross_entropy;
use dfeia_core::optim::{AdamW, AdamWConfig};
use dfeia_core::train::{train, LrSchedule, TrainConfig};
use dfeia_core::verify::overfit;
use dfeia_core::verify::rng::TestRng;
use dfeia_core::{Error, Graph, ParamStore, Tensor};

/// Decoupled-decay Adam written out step by step for one scalar.
struct ReferenceAdamW {
    lr: f64,
    wd: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    m: f64,
    v: f64,
    t: i32,
}

impl ReferenceAdamW {
    fn step(&mut self, theta: f64, grad: f64) -> f64 {
        self.t += 1;
        let decayed = theta * (1.0 - self.lr * self.wd);
        self.m = self.b1 * self.m + (1.0 - self.b1) * grad;
        self.v = self.b2 * self.v + (1.0 - self.b2) * grad * grad;
        let m_hat = self.m / (1.0 - self.b1.powi(self.t));
        let v_hat = self.v / (1.0 - self.b2.powi(self.t));
        decayed - self.lr * m_hat / (v_hat.sqrt() + self.eps)
    }
}

#[test]
fn adamw_on_quadratic_matches_reference() {
    let cfg = AdamWConfig { lr: 0.1, weight_decay: 0.05, ..AdamWConfig::default() };
    let mut store = ParamStore::<f64>::new();
    let id = store.register("theta", Tensor::full(&[1], 1.0)).unwrap();
    let mut opt = AdamW::new(cfg, &store);
    let mut reference = ReferenceAdamW {
        lr: cfg.lr,
        wd: cfg.weight_decay,
        b1: cfg.beta1,
        b2: cfg.beta2,
        eps: cfg.eps,
        m: 0.0,
        v: 0.0,
        t: 0,
    };
    let mut theta = 1.0;
    for step in 0..10 {
        let mut g = Graph::new();
        let p = g.param(&store, id);
        let sq = g.mul(p, p).unwrap();
        let loss = g.sum(sq).unwrap();
        store.zero_grad();
        g.backward(loss, &mut store).unwrap();
        opt.step(&mut store).unwrap();
        theta = reference.step(theta, 2.0 * theta);
        let got = store.value(id).data()[0];
        assert!((got - theta).abs() <= 1e-10, "step {step}: {got} vs {theta}");
    }
    assert_eq!(opt.steps(), 10);
    assert!(theta.abs() < 1.0);
}

#[test]
fn adamw_zero_gradient_without_decay_is_a_no_op() {
    let mut store = ParamStore::<f32>::new();
    let id = store.register("w", TestRng::new(1).tensor(&[4, 5]).cast()).unwrap();
    let before = store.value(id).clone();
    let mut opt = AdamW::new(AdamWConfig { weight_decay: 0.0, ..AdamWConfig::default() }, &store);
    for _ in 0..25 {
        store.zero_grad();
        opt.step(&mut store).unwrap();
    }
    assert_eq!(store.value(id).data(), before.data());

    // with decay only the multiplicative shrink remains
    let mut store = ParamStore::<f64>::new();
    let id = store.register("w", Tensor::full(&[1], 2.0)).unwrap();
    let mut opt = AdamW::new(AdamWConfig { lr: 0.1, weight_decay: 0.5, ..AdamWConfig::default() }, &store);
    opt.step(&mut store).unwrap();
    assert!((store.value(id).data()[0] - 2.0 * 0.95).abs() < 1e-15);
}

#[test]
fn cross_entropy_reference_values() {
    let uniform = Tensor::<f64>::zeros(&[3, 8]);
    assert!((cross_entropy(&uniform, &[0, 4, 7]).unwrap() - 8f64.ln()).abs() < 1e-12);

    let mut confident = Tensor::<f64>::zeros(&[2, 8]);
    confident.data_mut()[3] = 30.0;
    confident.data_mut()[8 + 6] = 30.0;
    assert!(cross_entropy(&confident, &[3, 6]).unwrap() < 1e-9);

    let logits = TestRng::new(2).uniform(&[4, 8], -5.0, 5.0);
    let labels = [1, 0, 7, 4];
    let want: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let row = &logits.data()[i * 8..(i + 1) * 8];
            let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            lse - row[l]
        })
        .sum::<f64>()
        / 4.0;
    assert!((cross_entropy(&logits, &labels).unwrap() - want).abs() < 1e-6);
    assert!(matches!(cross_entropy(&logits, &[0, 1, 8, 0]), Err(Error::Usage(_))));
}

fn tiny_batches(idx: &[usize]) -> (Tensor<f32>, Vec<usize>) {
    let mut rng = TestRng::new(idx.iter().map(|&i| i as u64).sum());
    let x = rng.tensor(&[idx.len(), 3, 32, 32]).cast();
    (x, idx.iter().map(|i| i % 8).collect())
}

#[test]
fn zero_epochs_leave_model_untouched() {
    let mut m = Model::<f32>::build(NetworkConfig::reduced(), 3).unwrap();
    let before = m.params.clone();
    let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
    let log = train(&mut m, &cfg, 8, |i, _| Ok(tiny_batches(i)), |_, _| Ok(None)).unwrap();
    assert!(log.is_empty());
    assert_eq!(m.params, before);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut m = Model::<f32>::build(NetworkConfig::reduced(), 5).unwrap();
        let cfg =
            TrainConfig { epochs: 3, batch_size: 4, seed: 9, schedule: LrSchedule::Cosine, ..TrainConfig::default() };
        let log = train(&mut m, &cfg, 10, |i, _| Ok(tiny_batches(i)), |_, _| Ok(Some(0.5))).unwrap();
        (log, m.params)
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert!((x.train_loss - y.train_loss).abs() <= 1e-9);
        assert_eq!(x.test_acc, Some(0.5));
    }
    assert_eq!(pa, pb);
}

#[test]
fn overfit_run_fits_the_synthetic_set() {
    let t = Instant::now();
    let out = overfit::run(0).unwrap();
    eprintln!(
        "overfit: {} steps, first epoch loss {:.4}, last epoch loss {:.4}, final loss {:.4}, accuracy {:.3} in {:.1?}",
        out.steps,
        out.log[0].train_loss,
        out.log.last().unwrap().train_loss,
        out.final_loss,
        out.final_accuracy,
        t.elapsed()
    );
    assert_eq!(out.steps, 200);
    assert_eq!(out.final_accuracy, 1.0);
    assert!(out.log.last().unwrap().train_loss < 0.05);
    assert!(out.log.last().unwrap().train_loss < out.log[0].train_loss);
}
