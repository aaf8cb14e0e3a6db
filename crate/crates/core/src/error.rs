use alloc::string::String;
use core::fmt;

/// Errors raised by the optimization core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidParameter(String),
    UnnormalizedRotation { norm: f64 },
    SingularCovariance,
    CulledBehindCamera,
    ShapeError { expected: usize, found: usize },
    InvalidCondition(&'static str),
    RejectedStep(String),
    InvalidDistribution(String),
    GenerationMismatch { cloud: u64, stats: u64 },
    EmptyCloud,
    DegenerateField,
    InvalidField,
    DivergedFit { start: f64, end: f64 },
    Aborted { rejected: usize, last: String },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::UnnormalizedRotation { norm } => write!(f, "rotation quaternion has norm {norm}, expected 1"),
            Error::SingularCovariance => f.write_str("covariance matrix is singular or ill-conditioned"),
            Error::CulledBehindCamera => f.write_str("gaussian lies behind the camera near plane"),
            Error::ShapeError { expected, found } => {
                write!(f, "shape mismatch: expected {expected} elements, found {found}")
            }
            Error::InvalidCondition(msg) => write!(f, "invalid condition: {msg}"),
            Error::RejectedStep(msg) => write!(f, "rejected optimizer step: {msg}"),
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::GenerationMismatch { cloud, stats } => {
                write!(f, "densification stats are stale (cloud generation {cloud}, stats generation {stats})")
            }
            Error::EmptyCloud => f.write_str("cloud is empty"),
            Error::DegenerateField => f.write_str("occupancy grid is uniform; no surface to extract"),
            Error::InvalidField => f.write_str("signed distance field contains NaN"),
            Error::DivergedFit { start, end } => write!(f, "tet grid fit diverged: loss {start} -> {end}"),
            Error::Aborted { rejected, last } => {
                write!(f, "optimization aborted after {rejected} rejected steps (last: {last})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
