//! Simulation pipeline, configuration, file formats and transcripts around
//! `dmcv-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characterize;
pub mod config;
pub mod error;
pub mod formats;
pub mod keyrate;
pub mod pipeline;
pub mod reconcile;
pub mod report;
pub mod transcript;

pub use error::{Error, Result};
