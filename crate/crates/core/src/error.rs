use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {node} out of range for graph with {n} nodes")]
    InvalidNode { node: usize, n: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entry {value} at index {index} exceeds 1")]
    EntryAboveOne { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("demand ({source_node},{target}) has bound {bound} below its distance {distance:?}")]
    InfeasibleDemand {
        source_node: usize,
        target: usize,
        bound: usize,
        distance: Option<usize>,
    },
    #[error("demand ({0},{0}) is degenerate")]
    DegenerateDemand(usize),
    #[error("demand {demand} has more than {cap} allowed paths")]
    PathCapExceeded { demand: usize, cap: usize },
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("node {from} addressed a message to non-neighbor {to}")]
    NonNeighbor { from: usize, to: usize },
    #[error("protocol did not terminate within {max_rounds} rounds")]
    Timeout { max_rounds: usize },
    #[error("cluster is not connected in the communication graph")]
    DisconnectedCluster,
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("node {0} was never padded; no flow certificate")]
    NoCertificate(usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
