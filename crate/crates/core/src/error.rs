use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subdivision count must be at least 1")]
    ZeroSubdivision,

    #[error("triangle index {index} out of range for mesh with {count} triangles")]
    InvalidTriangle { index: usize, count: usize },

    #[error("refinement closure exceeded depth bound {bound}; mesh topology is inconsistent")]
    ClosureDepth { bound: usize },

    #[error("all marking indicators are zero")]
    ZeroIndicators,

    #[error("marking indicator {index} is negative or not finite ({value})")]
    BadIndicator { index: usize, value: f64 },

    #[error("marking fraction theta = {0} must lie in (0, 1]")]
    BadTheta(f64),

    #[error("unsupported {kind} quadrature degree {degree}")]
    UnsupportedQuadrature { kind: &'static str, degree: usize },

    #[error("penalty parameter eta must be positive, got {0}")]
    BadPenalty(f64),

    #[error("regularization alpha must be positive, got {0}")]
    BadAlpha(f64),

    #[error("control bounds must satisfy lower < upper, got [{lower}, {upper}]")]
    BadBounds { lower: f64, upper: f64 },

    #[error("sparse factorization failed (eta = {eta}, {dofs} free dofs): {reason}")]
    Factorization { eta: f64, dofs: usize, reason: String },

    #[error("C0IP operator is not positive definite on free dofs for eta = {eta}")]
    Indefinite { eta: f64 },

    #[error(
        "primal-dual active set method did not terminate in {iterations} iterations \
         (last signatures: {previous} / {last})"
    )]
    PdasNoConvergence { iterations: usize, previous: String, last: String },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {update:e})")]
    FixedPointNoConvergence { iterations: usize, update: f64 },

    #[error("efficiency index undefined: total error is zero")]
    ZeroError,

    #[error("{0}")]
    Config(String),

    #[error("adaptive level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed mesh file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
