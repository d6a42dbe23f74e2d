use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("arity mismatch: expected {expected} factors, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("bad index set: {0}")]
    BadIndexSet(String),
    #[error("unknown or duplicate node id {0:?}")]
    UnknownNode(String),
    #[error("network contains a cycle")]
    CycleDetected,
    #[error("node ordering is not a topological sort of the graph")]
    OrderNotTopological,
    #[error("activation of node {node} has order {got}, expected {expected}")]
    ActivationOrderMismatch {
        node: usize,
        expected: usize,
        got: usize,
    },
    #[error("state size mismatch at node {node}: {detail}")]
    StateSizeMismatch { node: usize, detail: String },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least two samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("both groups have zero variance")]
    DegenerateVariance,
    #[error("epsilon must be strictly positive, got {0}")]
    EpsilonNonpositive(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
