use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] sumlogcone::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 0 success, 2 failed check, 3 bad configuration, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                sumlogcone::Error::Io(_) => 4,
                sumlogcone::Error::NonFinite { .. } | sumlogcone::Error::Diverged { .. } => 2,
                _ => 3,
            },
        }
    }
}
