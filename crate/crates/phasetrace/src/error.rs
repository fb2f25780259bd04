use std::path::{Path, PathBuf};

/// Errors surfaced by the runner. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Scenario configuration rejected; `field` names the offending key.
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    /// A scene asset is missing, unreadable or malformed.
    #[error("asset error in {}: {reason}", path.display())]
    Asset { path: PathBuf, reason: String },
    /// A numerical stage failed (unwrap failure, oracle mismatch, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Writing an output artifact failed.
    #[error("output error on {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl ToString) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.to_string(),
        }
    }

    pub fn asset(path: impl AsRef<Path>, reason: impl ToString) -> Self {
        Error::Asset {
            path: path.as_ref().to_path_buf(),
            reason: reason.to_string(),
        }
    }

    pub fn output(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Output {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Asset { .. } => 3,
            Error::Numerical(_) => 4,
            Error::Output { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
