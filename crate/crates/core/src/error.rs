use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A NaN or infinity surfaced in values, gradients or the loss.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("class {class} has no features")]
    EmptyClass { class: usize },

    #[error("class {class} has a zero-norm feature sum; its centroid direction is undefined")]
    ZeroNorm { class: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => 2,
            Error::NonFinite { .. } => 3,
            Error::Io { .. } | Error::Format(_) => 4,
            Error::Shape { .. } | Error::EmptyClass { .. } | Error::ZeroNorm { .. } => 1,
        }
    }
}
