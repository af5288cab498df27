use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("invalid action: {0}")]
    Action(String),
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in `{param}`")]
    Numeric { param: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("manifest mismatch: {0}")]
    Manifest(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
