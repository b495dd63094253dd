//! Run configuration and output artifacts.

pub mod config;
pub mod output;

pub use config::{defaults_text, parse_config, ConfigError, ConfigErrorKind, RunConfig};
pub use output::{resolve_output_dir, run, RunSummary, OUTPUT_DIR_ENV};
