use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate comment_id {id:?}")]
    DuplicateId { line: u64, id: String },

    #[error("line {line}: comment {id:?} replies to itself")]
    SelfReply { line: u64, id: String },

    #[error("comment {id:?} has dangling parent {parent:?}")]
    DanglingParent { id: String, parent: String },

    #[error("constant column {0}")]
    ConstantColumn(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("k = {k} exceeds the number of rows ({rows})")]
    TooManyClusters { k: usize, rows: usize },

    #[error("could not find {k} distinct points to initialize centers")]
    NotEnoughDistinct { k: usize },

    #[error("exact Mann-Whitney test requested but the samples contain ties; use the normal approximation")]
    ExactWithTies,

    #[error("exact enumeration too large ({0} states)")]
    EnumerationTooLarge(u128),

    #[error("infeasible cohort: {0}")]
    Infeasible(String),

    #[error("spec line {line}: {message}")]
    Spec { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
