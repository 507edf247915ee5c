//! Experiment harness: configuration, error metrics, dead-reckoning
//! baselines and the pipelines behind each subcommand.

pub mod baseline;
pub mod commands;
pub mod config;
pub mod metrics;

pub use commands::*;
pub use config::ExperimentConfig;
pub use metrics::{mae, mae_aligned};
