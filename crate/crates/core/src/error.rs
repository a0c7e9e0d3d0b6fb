use thiserror::Error;

use crate::linsys::LinsysError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} = {value} is out of range {range}")]
    OutOfRange { what: &'static str, value: f64, range: String },
    #[error("bisection did not converge: {0}")]
    NoConvergence(String),
    #[error(transparent)]
    Numerical(#[from] LinsysError),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

pub(crate) fn require_non_negative(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::OutOfRange { what, value, range: "[0, ∞)".into() })
    }
}
