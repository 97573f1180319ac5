//! Next-infected-node prediction on information cascades with a GRU encoder,
//! sequential attention over its hidden states, and prototype-based
//! disentangled attention that yields `K` factor representations per step.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
