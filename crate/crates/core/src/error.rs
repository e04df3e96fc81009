use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report. Variants group into the
/// CLI exit-code classes via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dim {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("infeasible protocol: {0}")]
    Infeasible(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dim {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data format, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::MissingInput(_) => 2,
            Error::Infeasible(_) => 2,
            Error::Format { .. } | Error::Io { .. } | Error::Dim { .. } | Error::Contract(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}
