use thiserror::Error;

use crate::model::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column} ({path}): {message}")]
    Syntax {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },

    #[error("invalid spec: {}", summarize(.0))]
    InvalidSpec(Vec<Diagnostic>),

    #[error("flow index {0} out of range")]
    UnknownFlow(usize),

    #[error("invalid prices: {0}")]
    InvalidPrices(String),

    #[error("spec has no average constraint (avg_power or link_capacity) to build the LP from")]
    MissingAverageConstraint,

    #[error("threshold extraction requires exactly one energy option per link (link {0} has several)")]
    MultipleEnergyLevels(usize),

    #[error("not a threshold policy: flow {flow}, node {node}, strict-transmit set is not an up-set in time-to-go")]
    NotThreshold { flow: u32, node: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .filter(|d| d.is_error())
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Process exit code: 2 for numerical failures, 1 for everything the
    /// caller can fix by changing the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver(_) => 2,
            _ => 1,
        }
    }
}
