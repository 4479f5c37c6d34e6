use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("point lies on the boundary set")]
    OnBoundary,
    #[error("no finite chart for ∞")]
    Infinity,
    #[error("too few points: need at least 3, got {0}")]
    TooFewPoints(usize),
    #[error("duplicate points {0} and {1}")]
    Duplicate(usize, usize),
    #[error("bad index {0}")]
    BadIndex(usize),
    #[error("path is not transverse to the edges")]
    NotTransverse,
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
