use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout error: {0}")]
    Layout(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("truncation N = {n} too small: thermal tail mass {tail:.3e} exceeds 1e-6")]
    Truncation { n: usize, tail: f64 },
    #[error("singular detuning: Delta_R = 0")]
    SingularDetuning,
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("steady state is not unique (singular value ratio {ratio:.3e})")]
    NonUniqueSteadyState { ratio: f64 },
    #[error("integration error: {0}")]
    Integration(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no peak found in window [{lo}, {hi}]")]
    NoPeak { lo: f64, hi: f64 },
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    /// True for failures caused by bad inputs rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Layout(_)
                | Error::Argument(_)
                | Error::Truncation { .. }
                | Error::SingularDetuning
                | Error::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
