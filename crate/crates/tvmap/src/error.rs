use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Numerics(#[from] tvmap_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn context(self, path: &Path) -> Self {
        match self {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        }
    }

    /// Process exit code: 2 for configuration and input problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numerics(
                tvmap_core::Error::NoConvergence { .. }
                | tvmap_core::Error::Diverged(_)
                | tvmap_core::Error::NonFinite(_)
                | tvmap_core::Error::NotPositiveDefinite(_)
                | tvmap_core::Error::ZeroReference,
            ) => 3,
            _ => 2,
        }
    }
}
