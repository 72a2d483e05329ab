use thiserror::Error;

use crate::statespace::SpaceTag;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("wrong space: expected {expected:?}, found {found:?}")]
    WrongSpace { expected: SpaceTag, found: SpaceTag },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Fock index {index} outside 0..={n_max}")]
    FockOutOfRange { index: usize, n_max: usize },

    #[error("Kraus completeness violated (max deviation {deviation:.3e})")]
    Completeness { deviation: f64 },

    #[error("trace drifted by {drift:.3e} after interval {interval}")]
    TraceDrift { drift: f64, interval: usize },

    #[error("truncation too small: population {population:.3e} at the top Fock level")]
    Truncation { population: f64 },

    #[error("integrator step rejected: {0}")]
    Stability(String),

    #[error("positivity lost: eigenvalue {eigenvalue:.3e} at t = {time}")]
    Positivity { eigenvalue: f64, time: f64 },

    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
