use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integral of {what} is not finite")]
    NonFiniteIntegral { what: &'static str },
    #[error("alpha = {alpha} exceeds the finiteness bound beta_max = {beta_max}")]
    UnsupportedAlpha { alpha: f64, beta_max: f64 },
    #[error("alpha must be a finite nonnegative number, got {0}")]
    InvalidAlpha(f64),
    #[error("sample is empty")]
    EmptySample,
    #[error("criterion is not finite: {0}")]
    NonFiniteCriterion(&'static str),
    #[error("parameter outside the model domain: {0}")]
    DomainError(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample of size {n} is too small to fit {dim} parameter(s)")]
    SampleTooSmall { n: usize, dim: usize },
    #[error("no start converged")]
    NoConvergence,
    #[error("degenerate sample: scale estimate collapses to zero")]
    DegenerateSample,
    #[error("no sign change of the estimating equation in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("matrix S is numerically singular")]
    SingularS,
    #[error("matrix M_alpha is numerically singular")]
    SingularMAlpha,
    #[error("matrix V_X is not positive definite")]
    SingularVX,
    #[error("operation not supported for model {0}")]
    UnsupportedModel(&'static str),
    #[error("scale estimate collapses to zero (exact fit)")]
    DegenerateScale,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("too few converged replicates: {0}")]
    TooFewReplicates(usize),
    #[error("quadrature cross-check failed: {first} vs {second}")]
    CrossCheck { first: f64, second: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}
