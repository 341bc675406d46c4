use std::path::{Path, PathBuf};

/// Errors raised while reading, writing or orchestrating artifacts.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed {what}: {detail}", path.display())]
    Format {
        path: PathBuf,
        what: &'static str,
        detail: String,
    },
    #[error("{}: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: lingsub_core::error::Error,
    },
    #[error(transparent)]
    Core(#[from] lingsub_core::error::Error),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// 2 for I/O failures, 1 for everything the user can fix by changing
    /// inputs or flags.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(path: &Path, source: lingsub_core::error::Error) -> Self {
        Error::Invalid {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
