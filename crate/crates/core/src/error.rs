//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix required to be Hermitian failed the max-norm check.
    #[error("matrix is not Hermitian: max |H - H†| = {residual:.3e} exceeds {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },

    /// A matrix required to be unitary failed the max-norm check.
    #[error("matrix is not unitary: max |U†U - I| = {residual:.3e} exceeds {tol:.3e}")]
    NotUnitary { residual: f64, tol: f64 },

    /// Partial trace requested on an operator without subsystem metadata.
    #[error("operator carries no subsystem factorization metadata")]
    MissingFactorization,

    /// A subsystem index exceeded the recorded factorization.
    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },

    /// Control values supplied do not match the layout's channel count.
    #[error("layout {layout} expects {expected} control channels, got {got}")]
    ChannelMismatch {
        layout: &'static str,
        expected: usize,
        got: usize,
    },

    /// A state list had the wrong number of entries.
    #[error("expected {expected} states, got {got}")]
    WrongStateCount { expected: usize, got: usize },

    /// A matrix or state had an unexpected dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Evaluation time fell outside the pulse's domain.
    #[error("time {t} lies outside the pulse domain [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    /// A quantity that must be strictly positive was not.
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },

    /// A pulse file violated the schema.
    #[error("pulse file schema violation: {0}")]
    Schema(String),

    /// A pulse file declared an unsupported format version.
    #[error("pulse file version {found} is unsupported (this reader supports {supported})")]
    Version { found: u32, supported: u32 },

    /// A numeric field held NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A requested Hilbert space exceeded the configured cap.
    #[error("Hilbert-space dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    /// Filesystem failure.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
