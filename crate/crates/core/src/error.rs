use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("{what}: expected {expected}, got {value}")]
    Domain {
        what: &'static str,
        expected: &'static str,
        value: f64,
    },

    /// A configuration or construction parameter is invalid. `field` is a
    /// dotted path (e.g. `psi.params.beta`) when the value came from a file.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("history underflow: state required at t = {required}, earliest stored node is t = {earliest}")]
    HistoryUnderflow { required: f64, earliest: f64 },

    #[error("history query at t = {requested} is newer than the latest node t = {latest}")]
    HistoryOverflow { requested: f64, latest: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("normalization denominator underflow for agent {agent} at s = {s}")]
    WeightUnderflow { agent: usize, s: f64 },

    #[error("the flocking condition needs N > 2 agents (got N = {n})")]
    TooFewAgents { n: usize },

    #[error("not enough samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error(
        "assignment grid too large: lcm({n}, {m}) = {lcm} exceeds {limit}; \
         sample both measures with equal atom counts"
    )]
    AssignmentTooLarge {
        n: usize,
        m: usize,
        lcm: u128,
        limit: usize,
    },

    #[error("determinism violation: identical initial data diverged at t = {t} (W1 = {w1})")]
    Determinism { t: f64, w1: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
