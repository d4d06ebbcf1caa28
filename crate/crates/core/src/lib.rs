//! Model-based episodic reinforcement learning with kernel conditional mean
//! embeddings and optimism-driven exploration.

// `!(x > 0.0)` is how parameters reject NaN; index loops follow the recurrences.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agent;
pub mod cme_estimator;
pub mod environments;
pub mod error;
pub mod harness;
pub mod kernel_core;
pub mod oracles;

pub use error::{Error, Result};
