//! Error type shared by all modules.

/// Everything that can go wrong across the crate.
///
/// Variants are named for the contract they violate rather than for the
/// operation that raised them; most correspond to a precondition on exactly
/// one public function.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("covariance dimension must be at least 1")]
    DimensionZero,
    #[error("matrix is not symmetric: max asymmetry {max_asym:e} exceeds tolerance {tol:e}")]
    NonSymmetric { max_asym: f64, tol: f64 },
    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e} at index {index}")]
    NotPositiveDefinite { eigenvalue: f64, index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("direction law has empty support")]
    EmptySupport,
    #[error("invalid direction law: {0}")]
    InvalidDirectionLaw(String),
    #[error("estimator {estimator} is not supported for this law/dimension ({detail})")]
    UnsupportedEstimator {
        estimator: &'static str,
        detail: String,
    },
    #[error("cannot normalize the zero vector")]
    ZeroVector,
    #[error("projection direction has zero norm")]
    ZeroDirection,
    #[error("transition density is undefined at coincident points")]
    CoincidentPoints,
    #[error("closed-form transition density exists only for the uniform direction law")]
    UnsupportedLaw,
    #[error("operation requires dimension {required}, got {got}")]
    UnsupportedDimension { required: usize, got: usize },
    #[error("need at least 2 replicas, got {0}")]
    InsufficientReplicas(usize),
    #[error("condition number must satisfy kappa >= 1, got {0}")]
    BadKappa(f64),
    #[error("invalid block dimensions d1={d1}, d2={d2}")]
    BadDimensions { d1: usize, d2: usize },
    #[error("epsilon must lie in (0,1), got {0}")]
    BadEpsilon(f64),
    #[error("invalid input: {0}")]
    BadInputs(String),
    #[error("matrix is rank deficient: sigma_min/sigma_max = {ratio:e}")]
    RankDeficient { ratio: f64 },
    #[error("system is inconsistent: least-squares residual {residual:e} exceeds {tol:e}")]
    Inconsistent { residual: f64, tol: f64 },
    #[error("drawn direction is degenerate (|A^T v| below threshold) after {retries} retries")]
    DegenerateDirection { retries: usize },
    #[error("parameter a must lie in (0,1), got {0}")]
    BadA(f64),
}
