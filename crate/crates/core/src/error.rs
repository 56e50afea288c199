use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Two grid functions with incompatible extents or spacings were combined.
    #[error("grid mismatch: dims {lhs_dims:?}/{rhs_dims:?}, spacing {lhs_spacing:?}/{rhs_spacing:?}")]
    GridMismatch {
        lhs_dims: [usize; 2],
        rhs_dims: [usize; 2],
        lhs_spacing: [f64; 2],
        rhs_spacing: [f64; 2],
    },

    /// Splitting weights violate the simplex constraint.
    #[error("invalid splitting weights: {reason} (offending index {index})")]
    InvalidWeights { index: usize, reason: String },

    /// Generic configuration problem detected before any run starts.
    #[error("configuration error: {0}")]
    Config(String),

    /// A shifted sub-solve failed.
    #[error("sub-solve failed for part {part} at step {step}: {reason}")]
    Solve {
        part: usize,
        step: usize,
        reason: String,
    },

    /// Oracle workspace input failed validation (non-symmetric or indefinite part).
    #[error("oracle validation error: {0}")]
    OracleInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
