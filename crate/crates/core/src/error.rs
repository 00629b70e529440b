use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A through-coupling coefficient of zero maps to an infinite coupling rate.
    #[error("infinite rate: through-coupling coefficient is zero")]
    InfiniteRate,

    #[error("no mode-splitting root: {0}")]
    NoSplitting(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("not converged: {0}")]
    Convergence(String),

    /// The synthesis function `f_o` is negative inside the requested window.
    #[error(
        "control synthesis invalid: f_o < 0 before t = {critical_time:.6e} s \
         (window starts at {window_start:.6e} s)"
    )]
    Positivity { critical_time: f64, window_start: f64 },

    #[error(
        "step size underflow at t = {t:.6e} s; the system is too stiff for the \
         explicit integrator (reduce g or refine the control grid)"
    )]
    Stiffness { t: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative method rather than of the inputs.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::Convergence(_) | Error::FitFailure(_) | Error::Stiffness { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}
