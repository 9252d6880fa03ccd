use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the process exit codes used by the CLI:
/// `Config` -> 2, `Format`/`Integrity` -> 3, `Numerical` -> 4, the rest -> 1.
#[derive(Debug, Error)]
pub enum Error {
    /// A file or directory did not match the expected on-disk layout.
    #[error("format error: {0}")]
    Format(String),

    /// Data was readable but internally inconsistent (shape mismatch,
    /// duplicate edges, bad labels).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Invalid argument to an operation.
    #[error("parameter error: {0}")]
    Param(String),

    /// Invalid or contradictory run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor dimensions do not conform.
    #[error("shape error: {0}")]
    Shape(String),

    /// A non-finite value appeared where a finite one is required.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format(_) | Error::Integrity(_) => 3,
            Error::Numerical(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
