use std::path::PathBuf;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} failed after jitter {jitter:e})")]
    NotPositiveDefinite { pivot: usize, jitter: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize, context: &'static str },

    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("point {index} at ({x}, {y}) lies outside the mesh")]
    PointOutsideMesh { index: usize, x: f64, y: f64 },

    #[error("degenerate triangle {triangle} (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design matrix is rank deficient")]
    RankDeficientDesign,

    #[error("residual sum of squares is zero; the model fits the data exactly")]
    ZeroResidual,

    #[error("EM component {component} collapsed (variance {variance:e})")]
    DegenerateComponent { component: usize, variance: f64 },

    #[error("Newton-Raphson did not converge in {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("Newton-Raphson step halving exhausted at iteration {iteration}")]
    StepHalvingExhausted { iteration: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("predictive density of point {index} underflowed to zero")]
    NumericalOverflow { index: usize },

    #[error("CPO of point {index} is not positive ({value})")]
    NonPositiveCpo { index: usize, value: f64 },

    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),

    #[error("held-out truth has zero variance")]
    DegenerateTruth,

    #[error("by-orbit cross-validation needs at least two orbits, found {found}")]
    InsufficientOrbits { found: usize },

    #[error("fold {fold} too small: {train} training and {test} test points (minimum {minimum})")]
    FoldTooSmall { fold: usize, train: usize, test: usize, minimum: usize },

    #[error("design produced no footprints inside the domain")]
    EmptyDesign,

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}: missing columns {missing:?}")]
    Schema { path: PathBuf, missing: Vec<String> },

    #[error("{path}: bad raster header: {message}")]
    Header { path: PathBuf, message: String },

    #[error("{path}: expected {expected} values, found {found}")]
    CountMismatch { path: PathBuf, expected: usize, found: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
