use std::fmt;

/// Errors raised by the simulation library.
///
/// The variants follow the three broad failure classes of the toolkit:
/// bad parameters, bad usage of an otherwise valid object, and resource
/// limits. The CLI maps them onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("boundary error: {0}")]
    Boundary(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(msg: impl fmt::Display) -> Self {
        Error::Parameter(msg.to_string())
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        Error::Usage(msg.to_string())
    }

    pub fn resource(msg: impl fmt::Display) -> Self {
        Error::Resource(msg.to_string())
    }

    pub fn config(key: impl Into<String>, msg: impl fmt::Display) -> Self {
        Error::Config {
            key: key.into(),
            message: msg.to_string(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Resource(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
