use std::path::{Path, PathBuf};

use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    /// Missing or invalid flags and manifest entries; exit code 2.
    Usage(String),
    /// Errors reported by the library on the data; exit code 1.
    Data(ldat_core::Error),
    Io { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(e) => e.kind(),
            CliError::Io { .. } => "io",
        }
    }

    /// One JSON object on one line, e.g. `{"error":"parse","message":"..."}`.
    pub fn to_json_line(&self) -> String {
        let message = match self {
            CliError::Usage(m) => m.clone(),
            CliError::Data(e) => e.to_string(),
            CliError::Io { path, source } => format!("{}: {source}", path.display()),
        };
        let flat = message.split_whitespace().collect::<Vec<_>>().join(" ");
        json!({ "error": self.kind(), "message": flat }).to_string()
    }
}

impl From<ldat_core::Error> for CliError {
    fn from(e: ldat_core::Error) -> Self {
        CliError::Data(e)
    }
}
