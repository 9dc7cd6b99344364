use thiserror::Error;

/// Library-wide error type. Every fallible operation returns one of these;
/// none panic on malformed numeric input.
#[derive(Debug, Error)]
pub enum ExdimError {
    #[error("knot times must be strictly increasing: t[{index}] = {time} repeats or decreases")]
    DuplicateTime { index: usize, time: f64 },

    #[error("non-finite value at knot {index}")]
    NonFiniteValue { index: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("cannot normalize a constant map (max == min == {value})")]
    NormalizeConstant { value: f64 },

    #[error("variation exponent must be finite and >= 1, got {p}")]
    InvalidExponent { p: f64 },

    #[error("invalid scale {r}: must be finite and in (0, range]")]
    InvalidScale { r: f64 },

    #[error("partition cardinality bound must be >= 2, got {m}")]
    InvalidCardinality { m: usize },

    #[error("exact mode limited to {limit} candidates, got {got}")]
    ExactTooLarge { limit: usize, got: usize },

    #[error("need at least {needed} scales inside the fit window, got {got}")]
    InsufficientScales { needed: usize, got: usize },

    #[error("p-variation at exponent {p} is diverging (last refinement added {increment:.3e})")]
    DivergentVariation { p: f64, increment: f64 },

    #[error("witness check failed: {reason}")]
    WitnessMismatch { reason: String },

    #[error("maximizing construction infeasible at stage {stage}: {reason} (completed {completed} stages)")]
    StageInfeasible {
        stage: usize,
        completed: usize,
        reason: String,
    },

    #[error("generator needs {needed} knots, exceeding budget {budget}")]
    KnotBudgetExceeded { needed: usize, budget: usize },

    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<csv::Error> for ExdimError {
    fn from(e: csv::Error) -> Self {
        ExdimError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ExdimError>;
