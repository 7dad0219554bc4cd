use thiserror::Error;

/// Errors produced by graph construction, generation, model translation,
/// training, data loading and sweep orchestration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} out of range for graph with {node_count} nodes")]
    InvalidNodeId { id: usize, node_count: usize },

    #[error("graph is disconnected")]
    DisconnectedGraph,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("graph needs at least 2 nodes, got {n}")]
    TooSmall { n: usize },

    #[error("edge saturation: {attempts} consecutive failed draws with {edges}/{target} edges placed")]
    EdgeSaturation {
        attempts: u64,
        edges: usize,
        target: usize,
    },

    #[error("{communities} communities requested for {n} nodes (at most n/2 allowed)")]
    TooManyCommunities { communities: usize, n: usize },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("{nodes} graph nodes cannot share a hidden width of {width}")]
    TooManyNodes { nodes: usize, width: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("sample of {requested} nodes exceeds graph size {available}")]
    TooLarge { requested: usize, available: usize },

    #[error("quadratic fit failed: {0}")]
    Fit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
