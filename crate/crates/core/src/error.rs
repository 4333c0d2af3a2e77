use thiserror::Error;

/// Errors shared by all modules of the crate.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// computation ran in.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidSpec(String),

    #[error("series contains a divergent component: {0}")]
    DivergentSeries(String),

    #[error("tolerance unreachable: {required} terms needed, cap is {cap}")]
    ToleranceUnreachable { required: u64, cap: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("target is not in the domain of sums; separating functional {functional:?}")]
    NotInDomain { functional: Vec<f64> },

    #[error("stream is not conditionally convergent")]
    NotConditional,

    #[error("precondition violated ({0})")]
    PreconditionViolated(String),

    #[error("rounding bound missed (achieved {achieved})")]
    BoundMissed { achieved: f64 },

    #[error("permutation search exhausted without a feasible order")]
    SearchExhausted,

    #[error("stage {stage} failed: {detail}")]
    StageFailure { stage: usize, detail: String },

    #[error("nuclearity is undecidable for tabulated grids")]
    UndecidableFamily,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("chain too short: {got} factors, need {need}")]
    ChainTooShort { need: usize, got: usize },

    #[error("lattice enumeration overflow; partial bound {partial_bound}")]
    EnumerationOverflow { partial_bound: f64 },

    #[error("representation invalid: {0}")]
    RepresentationInvalid(String),

    #[error("certificate replay failed: {0}")]
    CertificateReplayFailed(String),

    #[error("insufficient dimension: levels {levels} need dimension > {dim}")]
    InsufficientDimension { levels: usize, dim: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
