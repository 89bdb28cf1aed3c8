use std::path::PathBuf;

/// Error kinds surfaced by every stage of the toolkit.
///
/// The variants map one-to-one onto the CLI exit-code classes, see
/// [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("bad data: {0}")]
    Data(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("missing artifacts for ids: {}", .ids.join(", "))]
    MissingArtifact { ids: Vec<String> },

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("png error on {}: {source}", .path.display())]
    Png {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for this error: 2 invalid arguments, 3 missing
    /// artifacts, 4 data or validation problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::MissingArtifact { .. } => 3,
            Error::Format(_)
            | Error::Validation(_)
            | Error::Data(_)
            | Error::Degenerate(_)
            | Error::Undefined(_)
            | Error::Json(_)
            | Error::Csv(_) => 4,
            Error::Io { .. } | Error::Png { .. } => 1,
        }
    }
}
