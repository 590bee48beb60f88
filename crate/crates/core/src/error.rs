use thiserror::Error;

use crate::lattice::Basis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("basis mismatch: expected {expected:?}, found {found:?}")]
    BasisMismatch { expected: Basis, found: Basis },

    #[error("operands live on different lattices")]
    LatticeMismatch,

    #[error("temperature-like parameter must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("momentum component {0} is not on the 2π/L grid")]
    OffGridMomentum(f64),

    #[error("position component {0} is not on the L/M grid")]
    OffGridPosition(f64),

    #[error("split fraction {0} outside [0.05, 0.95]")]
    InvalidSplit(f64),

    #[error("envelope violates k ↔ -k symmetry (max deviation {0:e})")]
    AsymmetricEnvelope(f64),

    #[error("envelope has zero norm")]
    ZeroEnvelope,

    #[error(
        "packet too wide for minimum-image moments: effective width {width:.4} > {limit:.4}"
    )]
    PacketTooWide { width: f64, limit: f64 },

    #[error("particle number mismatch: {0} vs {1}")]
    ParticleMismatch(usize, usize),

    #[error("statistics mismatch between product states")]
    StatisticsMismatch,

    #[error("problem size {size} exceeds guard {limit}")]
    DimensionOverflow { size: u128, limit: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal identity violated: {0}")]
    IdentityViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
