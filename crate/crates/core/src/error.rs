use thiserror::Error;

/// Errors shared across the library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hurwitz: {0}")]
    NotHurwitz(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is not skew-symmetric: measured asymmetry {asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotSkewSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("non-monotone timestamp: new sample at t={new} does not follow t={last}")]
    NonMonotoneTime { new: f64, last: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate thrust: |tau_p| = {0:.3e} is too small to define an attitude")]
    DegenerateThrust(f64),

    #[error("degenerate attitude frame: |y_A x z_B| = {0:.3e}; yaw axis is parallel to thrust")]
    DegenerateFrame(f64),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
