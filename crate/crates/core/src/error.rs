use thiserror::Error;

/// Errors raised by the fitting, sampling and estimation routines.
#[derive(Debug, Error)]
pub enum MixError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A variance collapsed or a likelihood became non-finite.
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("observation {index}: every component density underflowed")]
    Underflow { index: usize },

    #[error("all {restarts} EM restarts collapsed")]
    AllRestartsFailed { restarts: usize },

    #[error("unknown model family `{0}`")]
    UnknownFamily(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("numerical failure at sweep {sweep}: {msg}")]
    Sampler { sweep: usize, msg: String },

    #[error("bridge sampling did not converge in {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    /// The log-likelihood does not grow linearly in the complexity.
    #[error("bias not stationary: estimated slope {kappa} is not positive")]
    BiasNotStationary { kappa: f64 },

    #[error("importance weights underflowed: {0}")]
    WeightUnderflow(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl MixError {
    /// True for failures caused by the numbers rather than by the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MixError::Degenerate(_)
                | MixError::Underflow { .. }
                | MixError::AllRestartsFailed { .. }
                | MixError::Sampler { .. }
                | MixError::NoConvergence { .. }
                | MixError::WeightUnderflow(_)
                | MixError::BiasNotStationary { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, MixError>;
