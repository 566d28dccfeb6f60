use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the layer that raises them:
/// state construction, joint-state surgery, weak-value estimation, protocol
/// bounds, and statistics over run logs.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("operator is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("basis is not complete on this space (probability mass {0:.6})")]
    IncompleteBasis(f64),

    #[error("subsystem index {index} out of range for {count} factors")]
    BadSubsystemIndex { index: usize, count: usize },

    #[error("unsupported dimension {got}, expected {expected}")]
    BadDim { expected: usize, got: usize },

    #[error("invalid measurement-strength amplitudes: {0}")]
    InvalidCoupling(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("state has no single undetected pointer factor")]
    NoPointerFactor,

    #[error("state has no system factor")]
    NoSystemFactor,

    #[error("bad pointer grid: {0}")]
    BadGrid(String),

    #[error("pre- and post-selection states are orthogonal; weak value is undefined")]
    OrthogonalPrePost,

    #[error("post-selection outcome has zero probability")]
    ImpossiblePostselection,

    #[error("coupling has zero strength; pointer readings carry no signal to invert")]
    ZeroStrengthCoupling,

    #[error("run log contains no standard-readout step to estimate from")]
    NoStandardReadout,

    #[error("selected sub-ensemble is empty")]
    EmptySubEnsemble,

    #[error("statistic is defined for single-step runs only, log has {0} steps")]
    MultiStepLog(usize),

    #[error("exact enumeration supports at most {max} steps, config has {got}")]
    TooManySteps { max: usize, got: usize },

    #[error("run log and probability table disagree on shape: {0}")]
    ConfigMismatch(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
