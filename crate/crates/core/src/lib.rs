//! Discrete-modulated CV-QKD engine: QPSK symbol simulation, statistical
//! tests, key map, certified key rate via a Frank–Wolfe SDP solver, and the
//! classical post-processing chain.
//!
//! `no_std` with `alloc`; file formats, configuration and parallel drivers
//! live in the companion `dmcv` crate.
#![cfg_attr(not(test), no_std)]
// Negated float comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod budget;
pub mod error;
pub mod keymap;
pub mod keyrate;
pub mod linalg;
pub mod params;
pub mod postproc;
pub mod simulator;
pub mod special;
pub mod statproc;
pub mod units;

pub use error::{Error, Result};
