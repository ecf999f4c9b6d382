//! Confusion matrix and the five classification metrics.
//!
//! Rows are true classes, columns predictions. Per-class figures come from
//! the one-vs-rest reduction; precision, recall, specificity and F1 are
//! macro-averaged (unweighted mean over classes) and accuracy is global
//! top-1, `trace / total`. A ratio with a zero denominator is 0.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    classes: usize,
    matrix: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ClassMetrics {
    pub fn from_counts(name: String, c: ClassCounts) -> Self {
        Self {
            name,
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            specificity: ratio(c.tn, c.tn + c.fp),
            // 2PR/(P+R) written over counts so TP = 0 gives exactly 0
            f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub total: u64,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    pub confusion: Vec<Vec<u64>>,
}

impl ConfusionCounts {
    pub fn new(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::usage("confusion matrix needs at least one class"));
        }
        Ok(Self { classes, matrix: vec![0; classes * classes] })
    }

    /// Row-major `k × k` counts.
    pub fn from_matrix(classes: usize, matrix: Vec<u64>) -> Result<Self> {
        if classes == 0 || matrix.len() != classes * classes {
            return Err(Error::usage(format!(
                "confusion matrix for {classes} classes needs {} entries, got {}",
                classes * classes,
                matrix.len()
            )));
        }
        Ok(Self { classes, matrix })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::usage(format!("{} labels but {} predictions", truth.len(), predicted.len())));
        }
        let mut c = Self::new(classes)?;
        for (&t, &p) in truth.iter().zip(predicted) {
            c.record(t, p)?;
        }
        Ok(c)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::usage(format!("class pair ({truth}, {predicted}) outside 0..{}", self.classes)));
        }
        self.matrix[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::usage("cannot merge confusion matrices of different sizes"));
        }
        for (a, b) in self.matrix.iter_mut().zip(&other.matrix) {
            *a += b;
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn matrix(&self) -> &[u64] {
        &self.matrix
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.matrix[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.matrix.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }

    pub fn class_counts(&self, class: usize) -> ClassCounts {
        let k = self.classes;
        let tp = self.get(class, class);
        let row: u64 = (0..k).map(|p| self.get(class, p)).sum();
        let col: u64 = (0..k).map(|t| self.get(t, class)).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        ClassCounts { tp, fp, fn_, tn: self.total() - tp - fp - fn_ }
    }

    /// Per-class metrics; missing names default to the class index.
    pub fn per_class(&self, names: &[String]) -> Vec<ClassMetrics> {
        (0..self.classes)
            .map(|c| {
                let name = names.get(c).cloned().unwrap_or_else(|| format!("{c}"));
                ClassMetrics::from_counts(name, self.class_counts(c))
            })
            .collect()
    }

    pub fn macro_metrics(&self) -> MacroMetrics {
        let per = self.per_class(&[]);
        let k = self.classes as f64;
        let mean = |f: fn(&ClassMetrics) -> f64| per.iter().map(f).sum::<f64>() / k;
        MacroMetrics {
            accuracy: self.accuracy(),
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            specificity: mean(|m| m.specificity),
            f1: mean(|m| m.f1),
        }
    }

    pub fn report(&self, names: &[String]) -> MetricsReport {
        MetricsReport {
            accuracy: self.accuracy(),
            total: self.total(),
            per_class: self.per_class(names),
            macro_avg: self.macro_metrics(),
            confusion: self.matrix.chunks(self.classes).map(|r| r.to_vec()).collect(),
        }
    }
}
