//! The full classifier: a two-convolution stem, four stages of MSFD/MSIA
//! blocks joined by stride-2 convolutions, and a pooled linear head.

mod config;
mod model;

pub use config::{BlockKind, NetworkConfig};
pub use model::{Block, CostReport, ForwardOutput, Model, Stage, StageCost};
