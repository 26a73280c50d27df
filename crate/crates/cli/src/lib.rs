//! Experiment runner for risk-aware grasp planning: dataset generation, belief-network
//! training, single episodes, benchmarks, perturbation stress runs and calibration checks.
//!
//! Every subcommand reads an optional TOML or JSON [`config::RunConfig`], applies flag
//! overrides and writes its artifacts under the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{run, Cli};
pub use error::CliError;
