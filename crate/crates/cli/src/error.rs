use std::net::SocketAddr;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for a bad command line.
pub const EXIT_USAGE: i32 = 1;
/// Process exit status for unreadable, invalid or inconsistent data.
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("missing artifact {name} (looked in {dir})")]
    MissingArtifact { name: &'static str, dir: PathBuf },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: rekom_core::Error,
    },

    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Data(#[from] rekom_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: impl Into<rekom_core::Error>) -> Self {
        CliError::File {
            path: path.into(),
            source: source.into(),
        }
    }
}
