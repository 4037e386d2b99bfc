use std::fmt;

use crate::graph::Violation;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(Violation),

    #[error("invalid graph on line {line}: {violation}")]
    InvalidRecord { line: usize, violation: Violation },

    #[error("node {node} is out of range for a graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("substructure has {size} nodes, larger than the encoder limit {s_max}")]
    SizeOverflow { size: usize, s_max: usize },

    #[error("label {label} is outside the class range 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("{0} is undefined for an empty substructure set")]
    EmptyPattern(&'static str),

    #[error("{0}: denominator is zero")]
    ZeroDenominator(&'static str),

    #[error("power iteration did not converge after {iterations} iterations (last relative change {last_change:e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonConvergence { .. } | Error::ZeroDenominator(_) | Error::Diverged(_) => {
                ErrorClass::Numeric
            }
            Error::Config(_) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Numeric => "numeric",
        };
        f.write_str(s)
    }
}
