use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample `{id}` has zero variance and cannot be standardized")]
    DegenerateSample { id: String },

    #[error("sample `{id}` contains non-finite values")]
    NonFinite { id: String },

    #[error("invalid tensor shape {dims:?}: {reason}")]
    InvalidShape { dims: Vec<usize>, reason: String },

    #[error("manifest {path}: {reason}")]
    ManifestParse { path: PathBuf, reason: String },

    #[error("tensor file {path}: {reason}")]
    TensorParse { path: PathBuf, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {found:?}{}", context_suffix(.context))]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
        context: Option<String>,
    },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("embedding dimension {k} too large for {n} samples (need k <= n - 1)")]
    DimensionTooLarge { k: usize, n: usize },

    #[error("eigenvalue {index} is {value:e}; too small for out-of-sample extension, reduce k")]
    SmallEigenvalue { index: usize, value: f64 },

    #[error("kernel row sum {0:e} underflows: sample is too far from every training point")]
    NumericalUnderflow(f64),

    #[error("k-nearest-neighbor graph has {components} connected components")]
    DisconnectedGraph { components: usize },

    #[error("training data contains only class {0}")]
    SingleClass(u8),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("sample `{0}` has no label")]
    MissingLabel(String),

    #[error("subject `{id}` has {count} votes, expected {expected}")]
    IncompleteVotes {
        id: String,
        count: usize,
        expected: usize,
    },

    #[error("subject sets differ: {0}")]
    SubjectSetMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incompatible file version: {0}")]
    VersionMismatch(String),

    #[error("fold {combo}: {source}")]
    Fold {
        combo: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sample `{id}`: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn in_fold(self, combo: usize) -> Error {
        Error::Fold {
            combo,
            source: Box::new(self),
        }
    }

    /// Attaches the id of the sample the error concerns.
    pub fn for_sample(self, id: &str) -> Error {
        Error::Sample {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}
