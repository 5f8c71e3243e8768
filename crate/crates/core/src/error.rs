use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gap {index} is not positive (got {value})")]
    NonPositiveGap { index: usize, value: f64 },

    #[error("gap {index} = {value} exceeds delta_max = {delta_max}")]
    GapExceedsDeltaMax {
        index: usize,
        value: f64,
        delta_max: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model {0} has no jump representation g(x) = x*eta(x)")]
    NoJumpRepresentation(String),

    #[error("model {0} has no square-integrable density at this time step")]
    NoDensity(String),

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported moment order {0} (supported: 2, 4, 8)")]
    UnsupportedMoment(u32),

    #[error("cutoff 1/h = {cutoff} exceeds grid u_max = {u_max}")]
    GridTooNarrow { cutoff: f64, u_max: f64 },

    #[error("block plan needs at least {needed} observations, got {got}")]
    PlanTooSmall { needed: usize, got: usize },

    #[error("iterative weights did not converge within {0} builds")]
    NonConvergence(usize),

    #[error("no bandwidth root in (0, 1): horizon T = {0} < 1")]
    NoRootInUnitInterval(f64),

    #[error("bracket failure while solving {equation}: {detail}")]
    BracketFailure {
        equation: &'static str,
        detail: String,
    },

    #[error("cannot parse {kind} designation {input:?}")]
    Parse { kind: &'static str, input: String },
}

pub type Result<T> = std::result::Result<T, Error>;
