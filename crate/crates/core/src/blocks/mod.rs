//! The two composite blocks of the network and the parameterised layers
//! they are built from.
//!
//! * [`MsfdBlock`]: frequency-domain feature extraction ([`FdfeLayer`])
//!   followed by the multi-branch multi-scale layer ([`MbmsLayer`]).
//! * [`MsiaBlock`]: conditional positional encoding ([`CpeLayer`]), adaptive
//!   feature guidance attention ([`AfgLayer`]) and the cascade multi-scale
//!   layer ([`CmsfeLayer`]).
//!
//! Every layer ends in a residual add, so zeroing its final projection turns
//! it into the identity.

mod layers;
mod msfd;
mod msia;

pub use layers::{Builder, ConvLayer, GrnLayer, LinearLayer};
pub use msfd::{FdfeLayer, MbmsLayer, MsfdBlock};
pub use msia::{AfgLayer, AttentionTriple, CmsfeLayer, CpeLayer, MsiaBlock};

use serde::{Deserialize, Serialize};

/// Width of one attention head.
pub const HEAD_DIM: usize = 32;

/// Branch kernels of the multi-branch multi-scale layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MbmsVariant {
    /// 3×3 depthwise with dilation 1, 2 and 3.
    #[default]
    Dilated,
    /// 3×3, dense 5×5 and dense 7×7 depthwise.
    LargeKernel,
}

/// Whether keys and values are neighbour-aggregated before attention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionVariant {
    /// 3×3 depthwise aggregation of K and V.
    #[default]
    Interaction,
    /// Plain multi-head self-attention; no aggregation parameters.
    Traditional,
}
