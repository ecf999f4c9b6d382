//! Training on an image-folder dataset with a JSON-lines epoch log.

use std::io::Write;

use dfeia_core::network::Model;
use dfeia_core::pixels::normalize_rgb;
use dfeia_core::train::{self, stack, EpochLog, TrainConfig};
use rand::Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{DfeiaError, Result};
use crate::evaluate::{self, CachedImage};

#[derive(Serialize)]
struct LogLine {
    epoch: usize,
    train_loss: f64,
    test_acc: Option<f64>,
}

/// Trains in place. Each epoch's `{epoch, train_loss, test_acc}` is
/// appended to `log` as one JSON line; `test_acc` is null when the test
/// split is empty.
pub fn run(
    model: &mut Model<f32>,
    dataset: &Dataset,
    config: &TrainConfig,
    mut log: Option<&mut dyn Write>,
    mut progress: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    let k = model.config.num_classes;
    if dataset.num_classes() != k {
        return Err(DfeiaError::dataset(
            &dataset.root,
            format!("dataset has {} classes but the config's num_classes is {k}", dataset.num_classes()),
        ));
    }
    if dataset.train.is_empty() && config.epochs > 0 {
        return Err(DfeiaError::dataset(&dataset.root, "training split is empty"));
    }
    let size = model.config.input_size;
    let train_set = evaluate::load_items(&dataset.train, size)?;
    let test_set = evaluate::load_items(&dataset.test, size)?;

    let mut write_error: Option<std::io::Error> = None;
    let result = train::train(
        model,
        config,
        train_set.len(),
        |idx, rng| {
            let mut xs = Vec::with_capacity(idx.len());
            let mut ys = Vec::with_capacity(idx.len());
            for &i in idx {
                let CachedImage { pixels, label } = &train_set[i];
                let flip = rng.random_bool(0.5);
                xs.push(normalize_rgb(pixels, size, size, flip)?);
                ys.push(*label);
            }
            Ok((stack(&xs)?, ys))
        },
        |m, entry| {
            let test_acc = if test_set.is_empty() {
                None
            } else {
                Some(evaluate::accuracy(m, &test_set).map_err(|e| dfeia_core::Error::Usage(e.to_string()))?)
            };
            let mut shown = *entry;
            shown.test_acc = test_acc;
            progress(&shown);
            if let Some(w) = log.as_mut() {
                let line =
                    serde_json::to_string(&LogLine { epoch: entry.epoch, train_loss: entry.train_loss, test_acc })
                        .expect("log line serialises");
                if let Err(e) = writeln!(w, "{line}") {
                    write_error = Some(e);
                    return Err(dfeia_core::Error::Usage("cannot write the training log".into()));
                }
            }
            Ok(test_acc)
        },
    );
    if let Some(e) = write_error {
        return Err(DfeiaError::Io { path: "<training log>".into(), source: e });
    }
    Ok(result?)
}
