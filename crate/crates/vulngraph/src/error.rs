use std::path::PathBuf;

use thiserror::Error;

/// Position-tagged failure from the Java front end.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{column}: expected {expected}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("provider unavailable{}: {reason}", sample_suffix(.sample_id))]
    ProviderUnavailable {
        reason: String,
        sample_id: Option<String>,
    },

    #[error("no cached embedding for sample {0}")]
    MissingEmbedding(String),

    #[error("embedding width {got} differs from first-seen width {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("could not find a safe/vulnerable verdict in reply: {0:?}")]
    UnparseableReply(String),

    #[error("no label for {}", .0.display())]
    LabelMissing(PathBuf),

    #[error("corpus contains no usable samples")]
    EmptyCorpus,

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn sample_suffix(id: &Option<String>) -> String {
    id.as_ref()
        .map(|s| format!(" (sample {s})"))
        .unwrap_or_default()
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn shape(
        op: &'static str,
        expected: impl Into<String>,
        got: impl Into<String>,
    ) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }

    /// Short category used for CLI exit messages.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::ShapeMismatch { .. } | Error::Domain { .. } => "numeric",
            Error::ProviderUnavailable { .. }
            | Error::MissingEmbedding(_)
            | Error::DimensionMismatch { .. }
            | Error::UnparseableReply(_) => "provider",
            Error::LabelMissing(_) | Error::EmptyCorpus => "dataset",
            Error::Config(_) => "config",
            Error::Format { .. } | Error::Json(_) => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
