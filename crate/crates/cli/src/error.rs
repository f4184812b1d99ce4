use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("parse error at line {line}, column `{column}`: {message}")]
    Parse { line: u64, column: String, message: String },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error(transparent)]
    Estimation(#[from] medml::Error),
    #[error("verification failed")]
    VerificationFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::VerificationFailed => 3,
            _ => 2,
        }
    }
}
