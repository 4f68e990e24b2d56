use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension n = {0} is not supported (n >= 5 required)")]
    Dimension(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("degenerate satellite scale {0}")]
    DegenerateScale(f64),
    #[error("singular Kelvin point: |eta| = {0:e}")]
    SingularKelvin(f64),
    #[error("kernel index {index} out of range for n = {n}")]
    KernelIndex { index: usize, n: usize },
    #[error("quadrature did not converge: estimate {value:e} with error {error:e}")]
    Quadrature { value: f64, error: f64 },
    #[error("far-field tail not cancelled: relative tail {ratio:e} at r = {radius}")]
    TailNotCancelled { ratio: f64, radius: f64 },
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("collocation failed: boundary residual {residual:e}")]
    Collocation { residual: f64 },
    #[error("point is not strictly inside the domain (distance {0:e})")]
    Exterior(f64),
    #[error("step size underflow at t = {t}")]
    StepSize { t: f64 },
    #[error("non-positive regular part H(q,q) = {0}")]
    NonPositiveH(f64),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 1 for invalid input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension(_)
            | Error::Invalid(_)
            | Error::KernelIndex { .. }
            | Error::NonPositiveH(_)
            | Error::Exterior(_)
            | Error::DegenerateScale(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (5..=crate::MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::Dimension(n))
    }
}
