use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has {found} entries, expected {expected}")]
    EntryCount { expected: usize, found: usize },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("state is not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("basis labels length {labels} does not match dimension {dim}")]
    LabelMismatch { labels: usize, dim: usize },

    #[error("expected a state on basis {expected:?}, found {found:?}")]
    WrongBasis { expected: Vec<String>, found: Vec<String> },

    #[error("{name} = {value} outside [{min}, {max}]")]
    OutOfRange { name: &'static str, value: f64, min: f64, max: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero coincidence counts")]
    ZeroCoincidences,

    #[error("accidental coincidence estimate is zero; CAR undefined")]
    UndefinedCar,

    #[error("postselection probability {probability:e} too small: no middle-bin events")]
    NoMiddleBin { probability: f64 },

    #[error("total counts are zero")]
    ZeroCounts,

    #[error("missing measurement setting: {0}")]
    MissingSetting(String),

    #[error("insufficient channel pairs: {users} users need {needed}, got {available} (short by {})", needed - available)]
    InsufficientChannelPairs { users: usize, needed: usize, available: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },

    #[error("unsupported wave-plate setting HWP1={hwp1}°, HWP2={hwp2}°")]
    UnsupportedWaveplates { hwp1: f64, hwp2: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("eigendecomposition failed")]
    Eigen,
}
