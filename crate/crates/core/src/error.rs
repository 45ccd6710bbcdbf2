use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("vertex {vertex} out of range for graph of order {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("illegal move: {0}")]
    IllegalMove(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("unknown name {0:?}")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, Error>;
