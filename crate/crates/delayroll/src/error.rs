//! Error type shared across the crate.

/// Everything that can go wrong in the library.
///
/// The CLI maps these onto its exit-code taxonomy: configuration and input
/// validation problems exit with 2, numerical failures with 3, I/O with 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller violated a precondition (bad shape, empty input, out-of-range
    /// parameter).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical routine failed (SVD non-convergence, non-finite score).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An iteration produced a non-finite value.
    #[error("{context} diverged at step {step}")]
    Diverged { context: String, step: usize },

    /// A data file could not be parsed.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A run configuration failed validation; `field` is the dotted path of
    /// the offending entry.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: msg.into(),
        }
    }

    /// Exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Parse { .. } | Error::Config { .. } => 2,
            Error::Numerical(_) | Error::Diverged { .. } => 3,
            Error::Io(_) | Error::Json(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
