use thiserror::Error;

pub type Result<T, E = MetaError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetaError {
    #[error("computation index {index} out of range (domain has {count} computations)")]
    InvalidAction { index: usize, count: usize },

    #[error("terminate is not a computation")]
    TerminateNotComputation,

    #[error("lifecycle violation: {0}")]
    Lifecycle(&'static str),

    #[error("weight constraint violated: {0}")]
    Constraint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reachable state space exceeds cap of {cap} beliefs")]
    ResourceLimit { cap: usize },

    #[error("belief not covered by value table: {0}")]
    Coverage(String),

    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),
}

impl MetaError {
    /// Short machine-readable category, used by the CLI's one-line errors.
    pub fn category(&self) -> &'static str {
        match self {
            MetaError::InvalidAction { .. } | MetaError::TerminateNotComputation => "invalid-action",
            MetaError::Lifecycle(_) => "lifecycle",
            MetaError::Constraint(_) => "constraint",
            MetaError::Config(_) => "config",
            MetaError::ResourceLimit { .. } => "resource-limit",
            MetaError::Coverage(_) => "coverage",
            MetaError::DegenerateDesign(_) => "degenerate-design",
        }
    }
}
