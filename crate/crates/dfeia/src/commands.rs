//! The subcommands, callable in-process. Each returns the JSON value the
//! binary prints on stdout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dfeia_core::network::{Model, NetworkConfig};
use dfeia_core::ops::softmax_last;
use dfeia_core::optim::AdamWConfig;
use dfeia_core::train::{EpochLog, LrSchedule, TrainConfig};
use dfeia_core::verify::suites::{SuiteOptions, SuiteReport};
use dfeia_core::Tensor;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{Dataset, Split};
use crate::error::{DfeiaError, Result};
use crate::{config, evaluate, preprocess, selftest, training, weights};

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub log: Option<PathBuf>,
    pub train: TrainConfig,
}

/// Trains from a fresh initialisation seeded by `train.seed` (which also
/// drives the split, the shuffles and the flips) and writes the weights.
pub fn train(args: &TrainArgs, mut progress: impl FnMut(&EpochLog)) -> Result<Value> {
    let cfg = config::load_or_default(args.config.as_deref())?;
    let dataset = Dataset::open(&args.data, args.train.seed)?;
    let mut model = Model::<f32>::build(cfg, args.train.seed)?;
    let mut log_file = match &args.log {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(DfeiaError::io(p))?)),
        None => None,
    };
    let log = training::run(
        &mut model,
        &dataset,
        &args.train,
        log_file.as_mut().map(|w| w as &mut dyn Write),
        &mut progress,
    )?;
    if let (Some(w), Some(p)) = (log_file.as_mut(), &args.log) {
        w.flush().map_err(DfeiaError::io(p))?;
    }
    weights::save(&model, &args.out)?;
    let last = log.last();
    Ok(json!({
        "weights": args.out,
        "epochs": log.len(),
        "train_images": dataset.train.len(),
        "test_images": dataset.test.len(),
        "final_train_loss": last.map(|e| e.train_loss),
        "final_test_acc": last.and_then(|e| e.test_acc),
    }))
}

pub fn eval(data: &Path, weights_path: &Path, config_path: Option<&Path>, split: Split, seed: u64) -> Result<Value> {
    let cfg = config::load_or_default(config_path)?;
    let dataset = Dataset::open(data, seed)?;
    let model = weights::load(weights_path, &cfg)?;
    if dataset.num_classes() != cfg.num_classes {
        return Err(DfeiaError::dataset(
            data,
            format!(
                "dataset has {} classes but the config's num_classes is {}",
                dataset.num_classes(),
                cfg.num_classes
            ),
        ));
    }
    let items = dataset.split(split);
    if items.is_empty() {
        return Err(DfeiaError::dataset(data, format!("the {split} split is empty")));
    }
    let images = evaluate::load_items(items, cfg.input_size)?;
    let report = evaluate::report(&model, &images, &dataset.classes)?;
    Ok(serde_json::to_value(report).expect("report serialises"))
}

#[derive(Clone, Debug, Serialize)]
pub struct Ranked {
    pub class: usize,
    pub prob: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub class: usize,
    pub prob: f64,
    pub topk: Vec<Ranked>,
}

/// Softmax probabilities of one image, top `topk` in descending order.
/// `topk` is clamped to the class count; the returned flag says whether it was.
pub fn predict(
    image: &Path,
    weights_path: &Path,
    config_path: Option<&Path>,
    topk: usize,
) -> Result<(Prediction, bool)> {
    let cfg = config::load_or_default(config_path)?;
    let model = weights::load(weights_path, &cfg)?;
    let img = preprocess::decode(image)?;
    let x = preprocess::preprocess(&img, cfg.input_size, false)?;
    let x = x.reshape(&[1, 3, cfg.input_size, cfg.input_size])?;
    let logits = model.predict(&x)?;
    let wide: Vec<f64> = logits.data().iter().map(|&v| v as f64).collect();
    let probs = softmax_last(&Tensor::new(&[wide.len()], wide)?);
    let mut ranked: Vec<Ranked> =
        probs.data().iter().enumerate().map(|(class, &prob)| Ranked { class, prob }).collect();
    // stable: ties keep the lower class index first
    ranked.sort_by(|a, b| b.prob.total_cmp(&a.prob));
    let clamped = topk > ranked.len();
    ranked.truncate(topk.max(1));
    let best = &ranked[0];
    Ok((Prediction { class: best.class, prob: best.prob, topk: ranked }, clamped))
}

/// Parameter and MAC counts for one image at `input_size`².
pub fn count(config_path: Option<&Path>, input_size: usize) -> Result<Value> {
    let cfg = config::load_or_default(config_path)?;
    let cfg = NetworkConfig { input_size, ..cfg };
    cfg.validate()?;
    let model = Model::<f32>::build(cfg, 0)?;
    let report = model.cost_report([1, 3, input_size, input_size])?;
    let per_stage: Vec<Value> =
        report.breakdown.iter().map(|s| json!({ "name": s.name, "params": s.params, "macs": s.macs })).collect();
    Ok(json!({
        "params": report.params,
        "macs": report.macs,
        "params_m": report.params as f64 / 1e6,
        "macs_m": report.macs as f64 / 1e6,
        "input_shape": report.input_shape,
        "per_stage": per_stage,
    }))
}

pub fn selftest(opts: &SuiteOptions) -> (Value, bool) {
    let reports: Vec<SuiteReport> = selftest::run(opts);
    let passed = reports.iter().all(SuiteReport::passed);
    let suites: Vec<Value> = reports
        .iter()
        .map(|r| json!({ "name": r.name, "checks": r.checks, "passed": r.passed(), "failures": r.failures }))
        .collect();
    (json!({ "passed": passed, "thorough": opts.thorough, "suites": suites }), passed)
}

/// Training defaults of the binary.
pub fn train_config(
    epochs: usize,
    batch_size: usize,
    lr: f64,
    weight_decay: f64,
    seed: u64,
    schedule: LrSchedule,
) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size,
        seed,
        schedule,
        optimizer: AdamWConfig { lr, weight_decay, ..AdamWConfig::default() },
    }
}
