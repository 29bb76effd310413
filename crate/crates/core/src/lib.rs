//! Mining of tail-class examples from an unlabeled pool: a frozen backbone,
//! a focal-loss recalibration layer, and a one-class autoencoder whose
//! reconstruction gap ranks the pool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backbone;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fsutil;
pub mod mcmau;
pub mod nn;
pub mod ranking;
pub mod recalib;
pub mod rng;

pub use error::{Error, Result};
