use thiserror::Error;

pub type Result<T> = std::result::Result<T, LinxError>;

#[derive(Debug, Error)]
pub enum LinxError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("matrix is not square: expected {expected} entries in row {row}, found {found}")]
    NonSquare {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symmetric: |C[{i},{j}] - C[{j},{i}]| = {diff:e} exceeds {tol:e}")]
    Asymmetric {
        i: usize,
        j: usize,
        diff: f64,
        tol: f64,
    },

    #[error(
        "matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e} < -{tol:e}"
    )]
    NotPsd { min_eigenvalue: f64, tol: f64 },

    #[error("diagonal entry {index} is {value}, must be positive")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("cardinality s = {s} must satisfy 0 < s < n = {n}")]
    InvalidCardinality { s: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exact enumeration refused: n = {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("pivot equation has no interior root (binary case applies)")]
    NoInteriorRoot,

    #[error("matrix is singular")]
    Singular,

    #[error("objective is -inf at the starting point (factorization failed)")]
    NotPositiveDefinite,

    #[error("regime mismatch: s = {s}, rank = {rank}")]
    RegimeMismatch { s: usize, rank: usize },

    #[error("could not bracket the optimal scaling within |psi| <= {limit}")]
    BracketFailure { limit: f64 },

    #[error("inner solve failed at psi = {psi}: {source}")]
    GammaSearch {
        psi: f64,
        #[source]
        source: Box<LinxError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
