//! Presets, configuration files and data export around `trps-core`.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod presets;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use run::{execute, run_to_dir, RunResult};
