//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by graph construction, tape execution, sampling and
/// the synthetic generators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node {0} out of range (graph has {1} nodes)")]
    NodeOutOfRange(usize, usize),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value produced by {op} (node {node})")]
    NonFinite { op: &'static str, node: usize },

    #[error("loss must be a scalar node, got {0}x{1}")]
    NonScalarLoss(usize, usize),

    #[error("{0}")]
    Tape(String),

    #[error("inner loop diverged at step {step}: {source}")]
    Diverged {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient labeled nodes for label {label}: need {need}, have {have}")]
    InsufficientNodes {
        label: u32,
        need: usize,
        have: usize,
    },

    #[error("task sampling failed: {0}")]
    Sampling(String),

    #[error("indistinguishable inputs: all rows identical with k > 1")]
    DegenerateClustering,

    #[error("graph too dense for exact check (path budget {0} exceeded)")]
    PathBudgetExceeded(usize),

    #[error("{0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at {file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
