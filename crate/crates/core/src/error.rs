use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("spacing {spacing} does not tile extent {extent}")]
    NonDivisibleSpacing { spacing: f64, extent: f64 },
    #[error("point {0:?} lies outside the mesh")]
    OutOfDomain([f64; 3]),
    #[error("mesh has no structured grid for index-based point location")]
    NotStructured,
    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),
    #[error("coefficient must be positive, got {0}")]
    NonpositiveCoefficient(f64),
    #[error("facet {0} does not belong to the mesh")]
    ForeignFacet(usize),
    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("interface facet {0} has no adjacent local cell")]
    OrphanInterfaceFacet(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("problem too large for dense path: n = {n}, limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("least-squares design matrix is rank deficient: {0}")]
    RankDeficient(String),
    #[error("two-level iteration diverged after {iterations} iterations")]
    Diverged { iterations: usize, last_difference: f64 },
    #[error("two-level iteration hit the iteration cap ({iterations}) with difference {last_difference:e}")]
    MaxItersExceeded { iterations: usize, last_difference: f64 },
    #[error("fitted constant must be positive, got {0}")]
    NonpositiveConstant(f64),
    #[error("need at least {needed} mesh ratios, got {got}")]
    InsufficientRatios { needed: usize, got: usize },
    #[error("Picard iteration did not converge after {iterations} iterations (change {change:e})")]
    PicardNoConvergence { iterations: usize, change: f64 },
    #[error("invalid material curve: {0}")]
    InvalidCurve(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
