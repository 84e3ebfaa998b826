use thiserror::Error;

/// Errors raised by the estimator, the samplers and the study drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("derivative of order {order} is not supported (supported orders: 1..={max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("adaptive quadrature on [{a}, {b}] did not reach tolerance {tol:e} within depth {depth}")]
    QuadratureNonConvergence { a: f64, b: f64, tol: f64, depth: u32 },

    #[error("argmin stayed in the outer tenth of the grid after {doublings} doublings (half width {half_width})")]
    GridEscape { doublings: u32, half_width: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. } | Error::GridEscape { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
