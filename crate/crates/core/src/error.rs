use thiserror::Error;

/// Errors raised by the profile evaluators and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("s = {s} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("envelope collapsed (sigma <= 0) at s = {s}")]
    EnvelopeCollapse { s: f64 },

    #[error("adaptive step size underflow at s = {s}")]
    StepUnderflow { s: f64 },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("grid [{x_min}, {x_max}] does not cover [{need_min}, {need_max}]")]
    GridTooNarrow {
        x_min: f64,
        x_max: f64,
        need_min: f64,
        need_max: f64,
    },

    #[error("step ds = {ds} exceeds the CFL limit {limit}")]
    CflViolation { ds: f64, limit: f64 },

    #[error("negative density {value} in cell {cell} at s = {s}")]
    Positivity { s: f64, cell: usize, value: f64 },

    #[error("wave function leaks through the boundary at s = {s} (|psi| = {amplitude:e})")]
    BoundaryLeak { s: f64, amplitude: f64 },

    #[error("field norm {norm} is not unity")]
    StaleState { norm: f64 },

    #[error("inconsistent second moments: <x2><p2> - <xp>^2 = {discriminant}")]
    InconsistentMoments { discriminant: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {value}"),
        })
    }
}
