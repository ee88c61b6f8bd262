use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the physics models, fits and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two inputs that must share a shape (grid, length) do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A computation produced a non-finite or ill-conditioned intermediate.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    Quadrature { estimate: f64, error_bound: f64 },

    /// A least-squares fit failed. `best` holds the best parameters reached, if any.
    #[error("fit failed: {reason}")]
    Fit {
        reason: String,
        best: Option<Vec<f64>>,
    },

    /// Bad user input: missing files, malformed CSV rows, invalid configuration.
    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 for input and configuration problems, 3 for numerical or fit failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Shape(_) => 2,
            Error::Domain(_) => 2,
            Error::Numerical(_) | Error::Quadrature { .. } | Error::Fit { .. } => 3,
        }
    }
}
