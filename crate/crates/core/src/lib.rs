//! Semantic segmentation of scanned land-use maps with a U-shape fully
//! convolutional network trained from scratch on the CPU.
//!
//! The crate covers the whole workflow: synthetic map corpora
//! ([`synthmap`]), raster and label I/O with patch sampling and
//! augmentation ([`data`]), the network ([`layers`], [`unet`]), SGD
//! training with cross-validation model selection ([`trainer`]), tiled
//! whole-map prediction ([`inference`]), morphological denoising
//! ([`postprocess`]) and Jaccard/accuracy evaluation ([`metrics`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod inference;
pub mod layers;
pub mod metrics;
mod par;
pub mod postprocess;
pub mod reference;
pub mod rng;
pub mod synthmap;
pub mod tensor;
pub mod trainer;
pub mod unet;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Scalar, Shape4, Tensor};
pub use unet::{GradientSet, UNetConfig, UNetModel};
