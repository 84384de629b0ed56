use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

/// Failure of a command, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag, key or value. Exit status 2.
    Config(String),
    /// The computation itself failed. Exit status 3.
    Runtime(String),
    /// Reading or writing a file failed. Exit status 3.
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
            CliError::Io { path, source } => write!(f, "I/O error on {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<curvelab_core::Error> for CliError {
    fn from(e: curvelab_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
