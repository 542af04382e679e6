use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("empty point cloud{}", .0.as_deref().map(|s| format!(" ({s})")).unwrap_or_default())]
    EmptyCloud(Option<String>),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("frame error: expected {expected} coordinates, got {actual}")]
    Frame {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("coordinate error: {message} (witness {witness:?})")]
    Coordinate { message: String, witness: [i32; 3] },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("layer {index}: {source}")]
    Layer {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cloud '{source_id}': {source}")]
    InCloud {
        source_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_layer(self, index: usize) -> Self {
        Error::Layer {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_cloud(self, source_id: &str) -> Self {
        Error::InCloud {
            source_id: source_id.to_string(),
            source: Box::new(self),
        }
    }

    /// Process exit code for the command line: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Layer { source, .. } | Error::InCloud { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
