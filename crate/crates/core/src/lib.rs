//! Value-learning and value-gradient-learning for deterministic episodic
//! control problems with known models.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod critics;
pub mod learners;
pub mod error;
pub mod harness;
pub mod models;
pub mod numeric;
pub mod policy;
pub mod targets;

pub use error::{Error, Result};
