use thiserror::Error;

pub type Result<T, E = AutodiffError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch at node {node} ({op}): {detail}")]
    Shape {
        op: &'static str,
        node: usize,
        detail: String,
    },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("loss must be a 1x1 tensor, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite value while checking gradient of {0}")]
    NonFinite(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    /// Failure inside a caller-supplied graph builder.
    #[error("graph construction failed: {0}")]
    Build(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
