use thiserror::Error;

/// Errors raised by samplers, model builders and data generators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("point {index} lies outside the model domain")]
    OutsideDomain { index: usize },

    #[error("noise density is zero or undefined at point {index}; offset cannot be formed")]
    OffsetUndefined { index: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("importance weights are degenerate: {0}")]
    DegenerateWeights(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the floating-point machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::DegenerateWeights(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
