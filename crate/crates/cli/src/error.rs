use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI command, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },

    #[error("analysis: {0}")]
    Analysis(String),

    #[error(transparent)]
    Core(#[from] meson_core::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Self::Config { field: field.into(), msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn input(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Self::Input { path: path.into(), msg: msg.to_string() }
    }

    /// 2 usage, 3 config, 4 I/O or malformed input, 5 simulation, 6 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Config { .. } => 3,
            Self::Io { .. } | Self::Input { .. } => 4,
            Self::Analysis(_) => 6,
            Self::Core(e) => match e {
                meson_core::Error::Spectral(_) => 6,
                meson_core::Error::Io(_) | meson_core::Error::Csv(_) | meson_core::Error::Parse { .. } => 4,
                _ => 5,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
