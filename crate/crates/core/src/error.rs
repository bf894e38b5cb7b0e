use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is singular to working precision (pivot {pivot} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("unknown builtin problem `{name}`; valid builtins are: {valid}")]
    UnknownBuiltin { name: String, valid: String },

    #[error("matrix has complex eigenvalues (discriminant {discriminant:e} < 0)")]
    ComplexEigenvalues { discriminant: f64 },

    #[error("B(phi, y) is indeterminate at (phi, y) = (0, 1); route to the r_k = r_(k-1) case")]
    Indeterminate,

    #[error("residual stall r_k = r_(k-1) at k = {k}")]
    Stall { k: usize },

    #[error("polynomial coefficient {index} does not vanish (|c| = {value:e})")]
    MemoryEffect { index: usize, value: f64 },

    #[error("too few usable records: {found} found, {required} required")]
    TooFewRecords { found: usize, required: usize },

    #[error("inconsistent beta history: {0}")]
    BetaHistory(String),

    #[error("trace is not usable here: {0}")]
    TraceMode(String),

    #[error("{0} is zero")]
    ZeroDenominator(&'static str),

    #[error("failed to parse problem file: {0}")]
    Parse(String),
}

pub(crate) fn dim_err(expected: impl ToString, actual: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
