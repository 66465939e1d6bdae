//! Experiment runner: TOML configs in, CSV tables out.

// `!(x > 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{run, CliError, Command, RunOutcome};
pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig};
