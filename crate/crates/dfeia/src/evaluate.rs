//! Batched inference over decoded images and the metrics report.

use dfeia_core::metrics::{ConfusionCounts, MetricsReport};
use dfeia_core::network::Model;
use dfeia_core::ops::argmax_rows;
use dfeia_core::train::stack;
use dfeia_core::Tensor;

use crate::dataset::Item;
use crate::error::Result;
use crate::preprocess;

/// One dataset item after the deterministic part of preprocessing.
#[derive(Clone, Debug)]
pub struct CachedImage {
    pub pixels: Vec<u8>,
    pub label: usize,
}

pub fn load_items(items: &[Item], input_size: usize) -> Result<Vec<CachedImage>> {
    items
        .iter()
        .map(|item| {
            let img = preprocess::decode(&item.path)?;
            Ok(CachedImage { pixels: preprocess::resize_and_crop(&img, input_size), label: item.label })
        })
        .collect()
}

pub const EVAL_BATCH: usize = 16;

/// Arg-max predictions for every image, in order.
pub fn predict_all(model: &Model<f32>, images: &[CachedImage]) -> Result<Vec<usize>> {
    let s = model.config.input_size;
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(EVAL_BATCH) {
        let xs = chunk
            .iter()
            .map(|c| dfeia_core::pixels::normalize_rgb(&c.pixels, s, s, false))
            .collect::<dfeia_core::Result<Vec<Tensor<f32>>>>()?;
        out.extend(argmax_rows(&model.predict(&stack(&xs)?)?));
    }
    Ok(out)
}

pub fn confusion(model: &Model<f32>, images: &[CachedImage]) -> Result<ConfusionCounts> {
    let pred = predict_all(model, images)?;
    let truth: Vec<usize> = images.iter().map(|c| c.label).collect();
    Ok(ConfusionCounts::from_predictions(model.config.num_classes, &truth, &pred)?)
}

pub fn accuracy(model: &Model<f32>, images: &[CachedImage]) -> Result<f64> {
    Ok(confusion(model, images)?.accuracy())
}

pub fn report(model: &Model<f32>, images: &[CachedImage], class_names: &[String]) -> Result<MetricsReport> {
    Ok(confusion(model, images)?.report(class_names))
}
