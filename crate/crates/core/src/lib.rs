//! Generative binary memory for class-incremental learning: per-class
//! Bernoulli mixture models replace stored exemplars, and pseudo-exemplars
//! sampled from them are replayed when a linear head learns new classes.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binarize;
pub mod bmm;
pub mod cil;
pub mod classifier;
pub mod data;
pub mod error;
pub mod memory;
pub mod rng;

pub use error::{Error, ErrorCategory, Result};
