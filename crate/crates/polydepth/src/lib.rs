//! KITTI file formats, sidecar formats, synthetic scenes and the batch
//! driver around [`polydepth_core`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
mod error;
pub mod kitti;
pub mod pipeline;
pub mod raster;
pub mod report;
pub mod rng;
pub mod sidecar;
pub mod synth;

pub use error::{Error, ParseError, Result};
pub use polydepth_core as core;
