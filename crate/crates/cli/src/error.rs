use std::io;
use std::path::PathBuf;

use r2dpca::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Lib(#[from] Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 1 usage or configuration, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Lib(e) => match e {
                Error::InvalidParameter(_) => 1,
                Error::InvalidInput(_)
                | Error::Dimension(_)
                | Error::Load { .. }
                | Error::ModelFormat(_)
                | Error::Io(_) => 2,
                Error::Singularity(_) | Error::NoConvergence(_) | Error::InvalidState(_) => 3,
            },
            CliError::Io { .. } | CliError::Csv { .. } => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
