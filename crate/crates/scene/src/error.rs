use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ply::PlyError;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Ply {
        path: PathBuf,
        #[source]
        source: PlyError,
    },

    /// Schema or semantic problem, located by a JSON pointer.
    #[error("{}: {pointer}: {message}", path.display())]
    Config {
        path: PathBuf,
        pointer: String,
        message: String,
    },

    #[error("invalid particles:\n{0}")]
    Particles(String),

    #[error(transparent)]
    Sim(#[from] splatmpm::Error),

    #[error("{0}")]
    Usage(String),
}

impl SceneError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        SceneError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for numerical breakdown, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SceneError::Sim(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}
