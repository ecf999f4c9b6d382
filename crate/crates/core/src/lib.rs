//! Pure numerical core of the dual-domain feature extraction / interaction
//! attention classifier.
//!
//! Everything in this crate is `no_std` + `alloc`: dense tensors, the
//! primitive kernels with their hand-written adjoints, a reverse-mode tape,
//! the single-level Haar wavelet transform, the MSFD and MSIA blocks, the
//! full network with parameter/MAC accounting, AdamW, and the evaluation
//! metrics. File formats, image decoding and the CLI live in the `dfeia`
//! crate.

#![no_std]
// kernels index several buffers with one loop variable
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod blocks;
pub mod error;
pub mod metrics;
pub mod network;
pub mod ops;
pub mod optim;
pub mod param;
pub mod pixels;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod verify;
pub mod wavelet;

pub use error::{Error, Result};
pub use param::{ParamId, ParamStore, Parameter};
pub use scalar::Scalar;
pub use tape::{Gradients, Graph, Var};
pub use tensor::Tensor;
