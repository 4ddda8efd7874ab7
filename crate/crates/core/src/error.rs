use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("deadlock detected: {0}")]
    Deadlock(String),
    #[error("rank {rank} aborted: {reason}")]
    Aborted { rank: usize, reason: String },
    #[error("rank {0} panicked")]
    RankPanicked(usize),
    #[error("invalid rank {rank} for communicator of size {size}")]
    InvalidRank { rank: usize, size: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("map mismatch: {0}")]
    MapMismatch(String),
    #[error("global index {0} is not present in the source map")]
    IndexNotFound(u64),
    #[error("map is not one-to-one: {0}")]
    NotOneToOne(String),

    #[error(transparent)]
    Param(#[from] ParamError),

    #[error("{solver} breakdown at iteration {iteration}")]
    Breakdown { solver: &'static str, iteration: usize },
    #[error("iteration diverged at step {iteration} (residual grew by {growth:.3e})")]
    Divergence { iteration: usize, growth: f64 },
    #[error("vector is linearly dependent on the current basis")]
    LinearDependence,

    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(u64),
    #[error("zero or tiny pivot in row {0}")]
    ZeroPivot(u64),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("rank-deficient least-squares or QR system: {0}")]
    RankDeficient(String),

    #[error("dual dimension mismatch: {0} vs {1}")]
    DualDimension(usize, usize),
    #[error("{0} evaluated outside its domain")]
    Domain(&'static str),

    #[error("line search failed after {0} trials")]
    LineSearchFailed(usize),
    #[error("linear solve inside Newton failed: {0}")]
    LinearSolveFailed(String),
    #[error("non-finite value in residual")]
    NonFinite,
    #[error("implicit stage solve failed at t = {t}: {reason}")]
    StageFailed { t: f64, reason: String },
    #[error("step size {dt:.3e} fell below minimum at t = {t}")]
    StepSizeTooSmall { t: f64, dt: f64 },
    #[error("invalid Butcher tableau: {0}")]
    InvalidTableau(String),

    #[error("unknown value {value:?} for parameter {key:?}")]
    UnknownType { key: String, value: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix market: {0}")]
    MatrixMarket(String),
    #[error("io: {0}")]
    Io(String),
    #[error("{0}")]
    Model(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Errors from building or reading parameter lists.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter name must be nonempty")]
    EmptyName,
    #[error("parameter list nesting exceeds {0} levels")]
    DepthExceeded(usize),
    #[error("parameter {name:?} holds {stored}, requested {requested}")]
    TypeMismatch {
        name: String,
        stored: &'static str,
        requested: &'static str,
    },
    #[error("unsupported value at {path:?}: {kind}")]
    Unsupported { path: String, kind: &'static str },
    #[error("malformed parameter document: {0}")]
    Malformed(String),
}
