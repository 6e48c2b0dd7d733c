use thiserror::Error;

use crate::bsde::PicardTrace;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation produced a non-finite value at step {step}, sample {sample}")]
    Simulation { step: usize, sample: usize },

    #[error("ill-conditioned regression at step {step}: condition number {cond:.3e}")]
    IllConditionedRegression { step: usize, cond: f64 },

    #[error("step-size error: {0}")]
    StepSize(String),

    #[error(
        "Picard iteration did not converge after {} iterations (last residual {:.3e})",
        trace.iterations,
        trace.residuals.last().copied().unwrap_or(f64::NAN)
    )]
    NonConvergence { trace: PicardTrace },

    #[error("contraction condition violated: lhs {lhs:.6e} >= 1/290 (margin {margin:.6e})")]
    ContractionViolated { lhs: f64, margin: f64 },

    #[error("singular volatility: {0}")]
    SingularVolatility(String),

    #[error("state error: {0}")]
    State(String),

    #[error("resource error: {0}")]
    Resource(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
