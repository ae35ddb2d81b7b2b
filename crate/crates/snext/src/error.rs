//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("graph error: {0}")]
    Graph(String),

    #[error("invalid value for `{key}`: {reason}")]
    ConfigValue { key: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("inner solver stopped after {iterations} iterations with residual {residual:.3e}")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("unsupported composite structure: {0}")]
    UnsupportedComposite(String),

    #[error("agent {agent} failed at iteration {iteration}: {source}")]
    AgentStep {
        agent: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
