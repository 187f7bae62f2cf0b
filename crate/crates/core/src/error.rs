use thiserror::Error;

/// Errors raised by the lattice calculus and the solvers built on top of it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid direction set: {0}")]
    InvalidDirections(String),

    #[error("direction index {index} out of range (k = {count})")]
    DirectionOutOfRange { index: usize, count: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("set is not strictly interior: {0}")]
    NotInterior(String),

    #[error("missing conductivity weight for direction {direction} at {point:?}")]
    MissingSigma { direction: usize, point: Vec<i64> },

    #[error("negative conductivity weight {value} in direction {direction}")]
    NegativeSigma { direction: usize, value: f64 },

    #[error("flipped triangle at node {node:?} (signed area {area:e})")]
    FlippedTriangle { node: Vec<i64>, area: f64 },

    #[error("interior operator is singular (smallest singular value {sigma_min:e}); unique continuation condition fails")]
    SingularInterior { sigma_min: f64 },

    #[error("ill-conditioned normal equations (smallest singular value {sigma_min:e})")]
    IllConditioned { sigma_min: f64 },

    #[error("exponential weight would overflow: |s| * diam = {0}")]
    Overflow(f64),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
