use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("condensate field is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { step: usize, what: &'static str },

    #[error("analysis window spans {span} but at least {required} is required")]
    WindowTooShort { span: f64, required: f64 },

    #[error("root finder did not converge after {iterations} iterations (max residual {max_residual:e})")]
    RootsNotConverged {
        iterations: usize,
        best: Vec<Complex64>,
        residuals: Vec<f64>,
        max_residual: f64,
    },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("Holstein-Primakoff occupation exhausted (|b1|^2 + |b2|^2 = {occupation})")]
    OccupationExhausted { occupation: f64 },

    #[error("state is not stationary (residual {residual:e})")]
    NotSteady { residual: f64 },

    #[error("path does not cross any phase boundary")]
    NoCrossing,
}
