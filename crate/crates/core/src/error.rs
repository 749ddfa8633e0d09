use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("step set is empty")]
    EmptySteps,

    #[error("step {0:?} appears more than once")]
    DuplicateStep(Vec<i64>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid kernel weights: {0}")]
    InvalidWeights(String),

    #[error("velocity {0} lies outside the convex hull of the steps")]
    OutsideHull(String),

    #[error("invalid convex representation: {0}")]
    InvalidRepresentation(String),

    #[error("invalid environment or potential: {0}")]
    InvalidModel(String),

    #[error("state budget exceeded: about {estimate} states needed, budget is {budget}")]
    BudgetExceeded { estimate: f64, budget: f64 },

    #[error("enumeration guard exceeded: {paths} paths, limit {limit}")]
    GuardExceeded { paths: f64, limit: f64 },

    #[error("environment is not periodic")]
    NotPeriodic,

    #[error("transfer operator is reducible; strongly connected components: {components:?}")]
    Reducible { components: Vec<Vec<usize>> },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
