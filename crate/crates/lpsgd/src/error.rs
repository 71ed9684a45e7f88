//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across quantization, problem construction,
/// optimization, bound evaluation, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Quantization was asked to round a NaN or infinity.
    #[error("input to quantize must be finite, got {0}")]
    NonFiniteInput(f64),

    /// A custom format descriptor violates the layout rules.
    #[error("invalid float format: {0}")]
    InvalidFormat(String),

    /// A format name string did not match any shipped format.
    #[error("unknown format name `{0}` (expected fp32, fp16, fp8e4m3, fp8e5m2, or fp4e2m1)")]
    UnknownFormat(String),

    /// A norm ratio or projection was requested against a zero vector.
    #[error("shrinkage ratio is undefined: the reference gradient has zero norm")]
    UndefinedRatio,

    /// Mismatched vector/matrix dimensions.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A spectrum request that no matrix can satisfy (e.g. d = 1 with c != L).
    #[error("infeasible spectrum: {0}")]
    InfeasibleSpectrum(String),

    /// A problem instance failed positive-definiteness or consistency checks.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// The optimizer produced a non-finite iterate.
    #[error("divergence detected: iterate became non-finite after iteration {last_finite_iteration}")]
    Divergence { last_finite_iteration: usize },

    /// A bound evaluator was called outside its guarantee's hypotheses.
    #[error("hypothesis violation: {0}")]
    InvalidHypothesis(String),

    /// Moment constants cannot be derived in closed form for this model.
    #[error("constants not derivable: {0}")]
    ConstantsNotDerivable(String),

    /// An experiment configuration is structurally invalid.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The experiment config file could not be parsed.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// Filesystem failure while reading configs or writing CSV.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
