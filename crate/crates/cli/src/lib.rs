//! Experiment driver behind the `radmm` binary: TOML configs, scenario
//! bundles, reconstructions, hyperparameter sweeps and metric reports.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{Overrides, ReconMethod};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
