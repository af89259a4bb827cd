use thiserror::Error;

/// Errors raised by the toolkit. Variants mirror the contract failures of each operation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular block: {0}")]
    SingularBlock(String),
    #[error("perturbation too large: |H|_0 = {norm:.6e} exceeds cap {cap:.6e}")]
    TooLarge { norm: f64, cap: f64 },
    #[error("expected a positive value, got {0}")]
    NonPositive(f64),
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("delta {delta:.6e} exceeds (2/9)*lambda0 = {limit:.6e}")]
    DeltaTooLarge { delta: f64, limit: f64 },
    #[error("empty atlas")]
    EmptyAtlas,
    #[error("degenerate defining functions: {0}")]
    DegenerateDefiningFunctions(String),
    #[error("cannot tame: {0}")]
    CannotTame(String),
    #[error("singular leading matrix at {0:?}")]
    SingularLeadingMatrix(Vec<f64>),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("fixed-point iteration is not contracting after {iterations} iterations")]
    NoContraction { iterations: usize },
    #[error("no convergence within {iterations} iterations (residual {residual:.3e})")]
    MaxIter { iterations: usize, residual: f64 },
    #[error("disc is not attached: max |y*| on the diameter is {0:.3e}")]
    NotAttached(f64),
    #[error("region too small: {0} nodes")]
    RegionTooSmall(usize),
    #[error("epsilon-prime condition violated: {condition} (worst point {point:?}, value {value:.6e})")]
    EpsilonPrimeViolated {
        condition: String,
        point: Vec<f64>,
        value: f64,
    },
    #[error("deflation constant not certified: {0}")]
    NotCertified(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("scene error: {0}")]
    Scene(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a stated precondition, as opposed to internal faults.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
