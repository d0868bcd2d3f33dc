use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("n_nodes must be at least 3, got {0}")]
    TooFewNodes(usize),

    #[error("density must lie in [1, {max}] for {n_nodes} nodes, got {density}")]
    DensityOutOfRange {
        n_nodes: usize,
        density: usize,
        max: usize,
    },

    #[error("node {node} is outside 1..={n_nodes}")]
    NodeOutOfRange { node: usize, n_nodes: usize },

    #[error("link {from}->{to} is not an edge of the segment")]
    NotAnEdge { from: usize, to: usize },

    #[error("{name} = {value} violates {bound}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        bound: String,
    },

    #[error("{what} needs {needed} items, above the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        needed: String,
        cap: u64,
    },

    #[error("no sign change of the objective on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("routing scheme was built for a different segment")]
    SchemeMismatch,

    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: impl ToString, bound: impl ToString) -> Self {
        Error::InvalidParameter {
            name,
            value: value.to_string(),
            bound: bound.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
