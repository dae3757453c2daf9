use std::path::PathBuf;

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimensions of an operand do not line up (vector/matrix/layer shapes).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A scalar or structural argument violates its precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A computation produced or received a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A binary or text payload could not be decoded.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// The requested evaluation mode cannot handle this instance.
    #[error("unsupported mode: {0}")]
    Mode(String),

    /// The two calibration anchors do not determine the system.
    #[error("degenerate anchors: {0}")]
    DegenerateAnchors(String),

    /// A configuration file or key is missing or malformed.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
