use std::path::Path;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input does not conform to a file schema; `field` is the JSON path of the offending value.
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    /// Argument outside an operation's domain (out-of-bounds point, bad logit, ...).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("collection error: {0}")]
    Collection(String),
    #[error("emission error: {0}")]
    Emission(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn validation(m: impl Into<String>) -> Self {
        Error::Validation(m.into())
    }

    pub fn domain(m: impl Into<String>) -> Self {
        Error::Domain(m.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
