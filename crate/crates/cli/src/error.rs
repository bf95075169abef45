use std::path::Path;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mflab::Error),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 validation, 3 coverage/overflow, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_coverage() => 3,
            CliError::Core(mflab::Error::Io(_) | mflab::Error::CacheFormat(_)) => 4,
            CliError::Core(_) | CliError::Validation(_) | CliError::Parse(_) => 2,
            CliError::Io { .. } | CliError::Internal(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            3 => "coverage",
            _ => "internal",
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
        .to_string()
    }
}
