//! Error type shared by every module of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the geometry, embedding, clustering
/// and I/O layers.
///
/// Numeric context (offending eigenvalue, distance, index, byte offset) is
/// carried on the variant so callers can report actionable messages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e} exceeds tolerance {tol:.1e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:.6e} is below tolerance {tol:.3e}")]
    NotPositiveDefinite { min_eigenvalue: f64, tol: f64 },

    #[error("symmetric eigendecomposition failed to converge for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point coincides with reference {index} (distance {dist:.3e}): the order-1 map is not differentiable at reference points")]
    AtReferencePoint { index: usize, dist: f64 },

    #[error("not enough points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("dataset point {index}: {source}")]
    DatasetPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("reference points are affinely dependent: the translated Gram matrix is not positive definite")]
    DegenerateRefs,

    #[error("no preimage exists: s^2 = {s_squared:.6e} is negative beyond tolerance")]
    NoSolution { s_squared: f64 },

    #[error("reference {ref_index} coincides with set point {point_index}: directions are undefined")]
    RefTouchesSet { ref_index: usize, point_index: usize },

    #[error("linear program for {context} terminated abnormally: {detail}")]
    LpFailure { context: &'static str, detail: String },

    #[error(
        "center rejection exhausted {retries} retries; tightest violated pair \
         ({i}, {j}) measured {observed:.6} against the accepted band [{lo}, {hi}]"
    )]
    RetriesExhausted {
        retries: usize,
        i: usize,
        j: usize,
        observed: f64,
        lo: f64,
        hi: f64,
    },

    #[error("label {label} at position {position} is outside the valid range [0, {k})")]
    LabelOutOfRange {
        label: usize,
        position: usize,
        k: usize,
    },

    #[error("parse error at byte {offset}: {detail}")]
    Parse { offset: usize, detail: String },

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Attaches the index of the offending dataset point.
    pub fn at_index(self, index: usize) -> Self {
        Error::DatasetPoint {
            index,
            source: Box::new(self),
        }
    }
}
