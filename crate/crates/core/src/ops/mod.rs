//! Primitive kernels on plain tensors, each paired with its adjoint. The
//! tape in [`crate::tape`] records calls to these and replays the adjoints.

pub mod activation;
pub mod conv;
pub mod linear;
pub mod loss;
pub mod matmul;
pub mod norm;
pub mod pool;
pub mod shape;
pub mod softmax;

pub use activation::{gelu, gelu_backward, gelu_grad_scalar, gelu_scalar, normal_cdf, Activation};
pub use conv::{conv2d, conv2d_backward, Conv2dGrads, Conv2dSpec, ConvGeometry};
pub use linear::{linear, linear_backward};
pub use loss::{argmax_rows, cross_entropy, cross_entropy_backward};
pub use matmul::{matmul, matmul_backward, transpose_last2};
pub use norm::{grn, grn_backward, GrnParams, GRN_EPSILON};
pub use pool::{global_avg_pool, global_avg_pool_backward};
pub use shape::{concat_channels, slice_channels, slice_channels_backward};
pub use softmax::{softmax, softmax_last, softmax_last_backward};
