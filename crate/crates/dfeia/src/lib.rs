//! File formats, dataset ingestion, image preprocessing and the command
//! implementations behind the `dfeia` binary. The numerics live in
//! `dfeia-core`.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod preprocess;
pub mod selftest;
pub mod training;
pub mod weights;

pub use error::{DfeiaError, Result};
