//! Batch runner for the arrowlab experiments.
//!
//! Every run reads one JSON config, writes its CSV and JSON results into a
//! fresh directory under the output root and finishes with `manifest.json`.
//! Results depend only on the command, the config and the seed.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::Path;

use serde_json::Value;

pub use commands::Command;
pub use error::CliError;
pub use run::{Check, Outcome, RunManifest, Status};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "ARROWLAB_OUT";

/// Validates `config` and runs `command`. Config errors return `Err`
/// before anything is written; failures during the run are recorded in
/// the manifest of the returned outcome.
pub fn run_command(command: Command, config: Value, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    commands::dispatch(command, config, out, seed)
}

/// Like [`run_command`] with the config read from a file.
pub fn run_config_file(command: Command, path: &Path, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    run_command(command, config::read_json(path)?, out, seed)
}
