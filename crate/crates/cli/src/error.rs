use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Syntax or schema error; the message carries line and column.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("{path}: {inner}")]
    InFile { path: String, inner: Box<CliError> },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: densnav_core::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn core(context: impl Into<String>) -> impl FnOnce(densnav_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    pub fn in_file(self, path: &Path) -> Self {
        CliError::InFile {
            path: path.display().to_string(),
            inner: Box::new(self),
        }
    }

    /// Whether the error is a problem with the scenario itself.
    pub fn is_invalid_scenario(&self) -> bool {
        match self {
            CliError::Parse(_) | CliError::Invalid { .. } => true,
            CliError::InFile { inner, .. } => inner.is_invalid_scenario(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
