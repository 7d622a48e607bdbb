use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid config{}: {message}", if .path.is_empty() { String::new() } else { format!(" at {}", .path) })]
    Invalid { path: String, message: String },
    #[error("{module}::{operation}: {source}")]
    Module { module: &'static str, operation: &'static str, source: arrowlab::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for anything the user can fix in the config, 2 for numerical or
    /// I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Module { source, .. } if !source.is_input_error() => 2,
            CliError::Io { .. } => 2,
            _ => 1,
        }
    }

    pub fn invalid(path: &str, source: arrowlab::Error) -> Self {
        CliError::Invalid { path: path.into(), message: source.to_string() }
    }
}

pub trait During<T> {
    /// Tags a core error with the module and operation that raised it.
    fn during(self, module: &'static str, operation: &'static str) -> Result<T, CliError>;
}

impl<T> During<T> for arrowlab::Result<T> {
    fn during(self, module: &'static str, operation: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Module { module, operation, source })
    }
}
