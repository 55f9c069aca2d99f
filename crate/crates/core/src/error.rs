use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SgapError>;

#[derive(Debug, Error)]
pub enum SgapError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    NodeRange { index: usize, num_nodes: usize },

    #[error("graph invariant violated: {0}")]
    Invariant(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("memory budget exceeded: {required} bytes required, budget is {budget} bytes")]
    Resource { required: usize, budget: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty mask: {0}")]
    EmptyMask(&'static str),

    #[error("training diverged (loss not finite) after epoch {last_finite_epoch}")]
    Training { last_finite_epoch: usize },

    #[error("surrogate fit error: {0}")]
    Fit(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown preset `{name}` (valid: {valid})")]
    UnknownPreset { name: String, valid: String },

    #[error("design space exhausted: every canonical configuration has been evaluated")]
    Exhausted,

    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SgapError {
    pub(crate) fn dim(expected: impl ToString, actual: impl ToString) -> Self {
        SgapError::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SgapError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input (bad files, flags, configs)
    /// rather than a failure while computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SgapError::Parse { .. }
                | SgapError::NodeRange { .. }
                | SgapError::Invariant(_)
                | SgapError::Parameter(_)
                | SgapError::Config(_)
                | SgapError::Validation(_)
                | SgapError::UnknownPreset { .. }
                | SgapError::Format { .. }
                | SgapError::Json(_)
                | SgapError::Dimension { .. }
                | SgapError::EmptyMask(_)
        )
    }
}
