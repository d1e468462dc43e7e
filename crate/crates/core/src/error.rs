use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid representation: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid group element: {0}")]
    InvalidElement(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("group {0} has no registered isotypic basis")]
    NoIsotypicBasis(String),

    /// A Gram block whose rank exceeds the irreducible dimension has no
    /// factor of the required shape.
    #[error("gram block {block} has rank {rank} but irreducible dimension {dim}")]
    InfeasibleRank { block: usize, rank: usize, dim: usize },

    #[error("search budget exceeded: {needed} cells requested, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
