//! Analytic and simulated correlation analysis of single-enzyme kinetics
//! on networks of conformations.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod correlation;
pub mod error;
pub mod io;
pub mod linalg;
pub mod network;
pub mod optimize;
pub mod passage;
pub mod scenario;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use network::{Generator, NetworkBuilder, NetworkSpec, ReducedGenerator};
pub use passage::PassageSet;
