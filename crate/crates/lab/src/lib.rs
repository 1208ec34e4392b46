//! Experiment runner for `steadylab-core`: configuration, field checkpoints,
//! CSV/JSON artifacts with digests, and the commands behind the `steadylab`
//! binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod output;

pub use commands::run_command;
pub use config::{parse_config, Command, ConfigError, ExperimentConfig};
pub use output::RunManifest;
