use serde::Serialize;
use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// Every variant corresponds to a rejected precondition; the CLI maps all of
/// them to exit status 1.
#[derive(Debug, Error, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("cocycle condition fails at (q1, q2, q3) = ({q1}, {q2}, {q3})")]
    CocycleViolation { q1: usize, q2: usize, q3: usize },

    #[error("invalid factor system: {0}")]
    InvalidFactorSystem(String),

    #[error("subgroup is not normal in {group}")]
    NotNormal { group: String },

    #[error("group {group} is not solvable; perfect core {core} has order {order}")]
    NotSolvable { group: String, core: String, order: usize },

    #[error("group {0} is not abelian")]
    NotAbelian(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid cellulation: {}", .0.join("; "))]
    InvalidCellulation(Vec<String>),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("register: {0}")]
    Register(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("forced outcome {outcome} on site {site} has probability {probability:.3e}")]
    ZeroProbability { site: String, outcome: usize, probability: f64 },

    #[error("input state is not symmetric: deviation {deviation:.3e} under element {element}")]
    NotSymmetric { element: usize, deviation: f64 },

    #[error("syndrome has nonzero total charge {0}")]
    NonzeroTotalCharge(usize),

    #[error("budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
