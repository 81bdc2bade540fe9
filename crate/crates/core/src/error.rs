use thiserror::Error;

/// Errors raised by model construction, assembly and integration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergent moment: {0}")]
    DivergentMoment(String),

    #[error("invalid input data: {0}")]
    Input(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("step size fell below dt_min = {dt_min:e} at t = {t} (last attempted dt = {dt:e})")]
    Stiffness { t: f64, dt: f64, dt_min: f64 },

    #[error("step limit of {0} exceeded")]
    StepLimit(usize),

    #[error("non-finite value in state at t = {t} (dt = {dt:e}, cell {cell})")]
    NonFinite {
        t: f64,
        dt: f64,
        cell: usize,
        state: Vec<f64>,
    },

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn require_positive_volume(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be a positive finite volume, got {v}")))
    }
}
