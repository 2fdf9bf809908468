//! Time-aggregation networks for irregular longitudinal clinical data.
//!
//! The crate covers the whole pipeline: windowing irregular visits into a
//! fixed grid, six small network architectures that differ only in how
//! they aggregate over time, TPE hyperparameter search, auROC with DeLong
//! intervals, and two interpretation tools (longitudinal permutation
//! importance and t-SNE plots of learned patient representations).
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod arch;
pub mod cli;
pub mod cohort;
pub mod error;
pub mod interpret;
pub mod metrics;
pub mod nn;
mod rng;
pub mod synthgen;
pub mod tuner;

pub use error::{Error, Result};
pub use rng::derive_seed;
