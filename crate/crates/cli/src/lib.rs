//! Experiment runner for the `sumlogcone` library: configuration, training
//! loops, the five experiment commands and their output files.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod train;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use experiments::{run, Check, Report};
