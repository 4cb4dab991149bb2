use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record could not be read; `location` is `file:line` or
    /// `file record N`.
    #[error("{location}: field `{field}`: {message}")]
    Parse {
        location: String,
        field: String,
        message: String,
    },
    #[error("sentence {id}: {violation}")]
    Invalid { id: String, violation: String },
    #[error("invalid dependency tree: {0}")]
    Tree(String),
    #[error("embedding file line {line}: {message}")]
    Embedding { line: usize, message: String },
    #[error("contextual vectors for sentence {id}: {message}")]
    Contextual { id: String, message: String },
    #[error("template error in slot `{slot}`: {message}")]
    Template { slot: String, message: String },
    #[error("task excluded: {task} is not part of the {profile} profile")]
    TaskExcluded { task: String, profile: String },
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("missing representation for sentence {0}")]
    MissingRep(String),
    #[error("label lists differ in length: {preds} predictions vs {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("unknown relation label `{0}`")]
    UnknownLabel(String),
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Autodiff(#[from] relprobe_autodiff::AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
