use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters for {family}: {reason}")]
    InvalidParams { family: &'static str, reason: String },

    #[error("point {0} lies within pole tolerance of a pole")]
    PoleProximity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {0} is omitted or exceptional for this family")]
    OmittedValue(String),

    #[error("operation not supported for {family}: {what}")]
    Unsupported { family: &'static str, what: String },

    #[error("balanced growth rejected: {0}")]
    NotBalanced(String),

    #[error("coverage error: preimage {point} (branch {branch}) is outside every pivot cell")]
    Coverage { point: String, branch: i64 },

    #[error("gate failed ({condition}): {detail}")]
    Gate { condition: &'static str, detail: String },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
