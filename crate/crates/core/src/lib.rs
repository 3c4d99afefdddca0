//! Asynchronous distributed proximal gradient with delay-averaged master
//! aggregation, plus a deterministic simulator, a threaded runtime and tools
//! for checking convergence envelopes.

pub mod algorithm;
pub mod analysis;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod problem;
pub mod runtime;
pub mod simulator;
pub mod synth;

pub use error::{Error, Result};
