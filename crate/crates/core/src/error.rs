use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid disorder law: {0}")]
    InvalidLaw(String),
    #[error("empty row range")]
    EmptyRange,
    #[error("row {y} outside sample range [{lo}, {hi})")]
    RowOutOfRange { y: i64, lo: i64, hi: i64 },
    #[error("point {0} is not in the open right half-plane")]
    NotInHalfPlane(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate angle: trace of the product vanished")]
    DegenerateAngle,
    #[error("boundary vector not certified after {layers} layers (diameter {diameter:e}, tol {tol:e})")]
    NonConvergence { layers: usize, diameter: f64, tol: f64 },
    #[error("invalid torus: {0}")]
    InvalidTorus(String),
    #[error("torus too large for exhaustive enumeration ({vertices} vertices, limit {limit})")]
    TooLarge { vertices: usize, limit: usize },
    #[error("no consistent Kasteleyn sign pattern found")]
    SignCalibration,
    #[error("singular Fourier block at k = {0}")]
    SingularBlock(f64),
    #[error("invalid edge pair: {0}")]
    InvalidPair(String),
    #[error("quadrature did not reach tolerance: {0}")]
    Quadrature(String),
    #[error("fit failed: {0}")]
    Fit(String),
}
