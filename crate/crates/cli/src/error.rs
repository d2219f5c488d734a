use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("{context}: {source}")]
    Engine {
        context: String,
        #[source]
        source: seqprobe_core::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{failed} of {total} verification checks failed")]
    Verification { failed: usize, total: usize },
}

impl CliError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn engine(context: impl Into<String>) -> impl FnOnce(seqprobe_core::Error) -> Self {
        let context = context.into();
        move |source| CliError::Engine { context, source }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Invalid { .. } => "invalid-config",
            CliError::Engine { .. } => "engine",
            CliError::Csv(_) => "csv",
            CliError::Verification { .. } => "verification",
        }
    }

    /// Single-line JSON object for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
