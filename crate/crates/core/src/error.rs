use std::path::PathBuf;

/// Errors raised across the simulation and DSP stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("aliasing: {0}")]
    Aliasing(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },
}

impl Error {
    /// Errors caused by the configuration rather than by the run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::ConfigParse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
