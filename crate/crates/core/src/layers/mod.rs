//! Forward and backward passes of the network primitives.
//!
//! Backward passes are hand-written. Each forward returns a cache holding
//! exactly what its backward needs.

mod batchnorm;
mod conv;
mod conv3x3;
mod pool;
mod relu;
mod softmax;
mod upsample;

pub use batchnorm::{batchnorm_backward, batchnorm_forward, BnCache, BnGrads, BnParams};
pub use conv::{conv2d_backward, conv2d_forward, ConvCache, ConvGrads, ConvParams};
pub use pool::{maxpool2d_backward, maxpool2d_forward, PoolCache};
pub use relu::{relu_backward, relu_forward, ReluCache};
pub use softmax::{softmax_channels, softmax_cross_entropy};
pub use upsample::{upsample2x_backward, upsample2x_forward, UpsampleCache};
