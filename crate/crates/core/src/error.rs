use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Unsupported or malformed GeoTIFF content. `tag` names the offending
    /// TIFF tag when one is responsible.
    #[error("GeoTIFF format error{}: {message}", tag.map(|t| format!(" in tag {t}")).unwrap_or_default())]
    Format { tag: Option<&'static str>, message: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("unknown {kind} `{name}` (available: {})", available.join(", "))]
    Name {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("inconsistent observations: {0}")]
    Inconsistent(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Parse(#[from] crate::dsl::ParseError),

    #[error(transparent)]
    Type(#[from] crate::dsl::TypeError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn format(tag: Option<&'static str>, message: impl Into<String>) -> Self {
        Error::Format {
            tag,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
