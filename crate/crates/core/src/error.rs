use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({lat}, {lon}) is outside the supported projection range")]
    Range { lat: f64, lon: f64 },

    #[error("point ({lat}, {lon}) lies outside the grid bounding box")]
    OutOfBounds { lat: f64, lon: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("invalid bounding box: {0}")]
    InvalidBoundingBox(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown category id `{0}`")]
    UnknownCategory(String),

    #[error("user `{0}` has no check-ins")]
    UndefinedUser(String),

    #[error("venue has {0} check-ins, below the temporal threshold")]
    BelowThreshold(u32),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing prerequisite: run the `{stage}` stage first")]
    Dependency { stage: String },

    #[error("stale cache: `{stage}` was built with a different configuration; rerun it")]
    StaleCache { stage: String },

    #[error("output directory is locked by another run ({0})")]
    Locked(PathBuf),

    #[error("invalid synthetic city spec: {0}")]
    Spec(String),

    #[error("data error: {0}")]
    Data(String),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
