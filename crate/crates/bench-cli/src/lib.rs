//! Experiment harness for metalevel policies: trains BMPS weights, evaluates
//! policy matrices, runs the tornado timing sweep, fits VOC regressions and
//! dumps exact value tables. Every output is a versioned CSV reproducible
//! from the config and its seed.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod records;
pub mod tornado;

pub use config::{Domain, ExperimentConfig, TornadoConfig};
pub use error::{BenchError, Result};
