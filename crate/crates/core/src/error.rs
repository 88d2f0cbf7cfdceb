use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("symbol evaluated at its singular point {0:?}")]
    SingularPoint([f64; 3]),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("accuracy target unattainable: {0}")]
    Accuracy(String),

    #[error("unsupported Renyi order {kappa}: {reason}")]
    UnsupportedOrder { kappa: f64, reason: String },

    #[error("lattice resolution too coarse: spacing {spacing} > epsilon/3 = {limit}")]
    Resolution { spacing: f64, limit: f64 },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("problem too large: {0}")]
    Size(String),

    #[error("{clipped} of {dim} eigenvalues fell outside [-{tol}, 1+{tol}]")]
    NumericalQuality { clipped: usize, dim: usize, tol: f64 },

    #[error("section too short: kernel has not decayed at X/2 (relative size {ratio:.3e})")]
    SectionTooShort { ratio: f64 },

    #[error("profile coverage insufficient: {0}")]
    Coverage(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("comparison mismatch: {0}")]
    Comparison(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
