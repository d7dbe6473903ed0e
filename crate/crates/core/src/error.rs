use std::path::PathBuf;

/// Everything that can go wrong inside the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("unknown document id {0}")]
    UnknownId(String),

    #[error("unknown class label {0}")]
    UnknownLabel(String),

    #[error("class {label} has {count} document(s), need at least {required}")]
    ClassTooSmall {
        label: String,
        count: usize,
        required: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no features survived filtering (min_df = {min_df})")]
    EmptyFeatureSpace { min_df: usize },

    #[error("negative feature value {value} at feature {feature}")]
    NegativeFeature { feature: usize, value: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("ratio cutoff {cutoff} unreachable after {iterations} iteration(s); best ratio {best_ratio:.4}")]
    CutoffUnreachable {
        cutoff: f64,
        iterations: usize,
        best_ratio: f64,
    },

    #[error("unsupported checkpoint version {0}")]
    Version(u32),
}

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
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
