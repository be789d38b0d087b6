use std::path::PathBuf;

use thiserror::Error;

use crate::model::{CheckKind, Role};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind}: expected {expected} {field}, found {found}")]
    ArityMismatch {
        kind: CheckKind,
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{kind}: roles[{position}] must be `{expected}`, found `{found}`")]
    RoleOrderMismatch {
        kind: CheckKind,
        position: usize,
        expected: Role,
        found: Role,
    },

    #[error("{kind}: no question for role `{role}`")]
    MissingQuestion { kind: CheckKind, role: Role },

    #[error("invalid probability {0} (must lie in [0, 1])")]
    InvalidProbability(f64),

    #[error("{0} has no closed-form arbitrage")]
    UnsupportedKind(CheckKind),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "solver did not converge after {iterations} iterations \
         (best violation {best_violation:.6e}, residual {residual:.3e})"
    )]
    SolverDidNotConverge {
        iterations: usize,
        best_violation: f64,
        best_probs: Vec<f64>,
        residual: f64,
    },

    #[error("no true probability for question `{0}`")]
    MissingTrueProb(String),

    #[error("http error: {message}")]
    Http {
        message: String,
        payload: Option<String>,
    },

    #[error("unparseable forecaster output: {message} (payload: {payload:?})")]
    ForecastParse { message: String, payload: String },

    #[error("tuple coordinate {index}: {source}")]
    Coordinate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no {kind} tuple can be sampled for question `{question_id}`")]
    SamplerFailure { kind: CheckKind, question_id: String },

    #[error("base-forecast budget of {cap} calls exceeded")]
    BudgetExceeded { cap: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{source_name}:{line}: schema error in field `{field}`: {message}")]
    Schema {
        source_name: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("{source_name}:{line}: duplicate id `{id}`")]
    DuplicateId {
        source_name: String,
        line: usize,
        id: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used by the command-line frontend to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Data,
    Solver,
    Network,
    Budget,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::SolverDidNotConverge { .. } => ErrorCategory::Solver,
            Error::Http { .. } | Error::ForecastParse { .. } => ErrorCategory::Network,
            Error::BudgetExceeded { .. } => ErrorCategory::Budget,
            Error::Coordinate { source, .. } => source.category(),
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
