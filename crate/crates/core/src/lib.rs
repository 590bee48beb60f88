//! Thermally excited wave-packets on a periodic lattice.
//!
//! Units are ħ = k_B = 1 throughout.

pub mod envelope;
pub mod error;
pub mod greens;
pub mod lattice;
pub mod manybody;
pub mod operator;
pub mod regime;
pub mod thermal;
pub mod wavepacket;

pub use envelope::{Envelope, EnvelopeKind};
pub use error::{Error, Result};
pub use lattice::{AmplitudeField, Basis, Lattice, MomentumLabel, Vector};
pub use regime::{Flagged, RegimeFlags};
pub use operator::OperatorMatrix;
