//! Where lattice sums reproduce continuum formulas.
//!
//! A Boltzmann factor at inverse temperature `β` is converged on the lattice when
//! both its momentum tail at the grid edge (UV) and its periodic-image overlap
//! (IR) are below [`REGIME_GUARD`]:
//!
//! * UV: `e^{-β ε_edge} < 1e-14`, with `ε_edge = (πM/L)²/(2m)`;
//! * IR: `e^{-(L/λ)²} < 1e-14`, with `λ = √(2β/m)`.
//!
//! Operations that rely on continuum identities attach [`RegimeFlags`] to their
//! results instead of failing.

use std::fmt;

use crate::lattice::Lattice;

pub const REGIME_GUARD: f64 = 1e-14;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct RegimeFlags {
    pub uv: bool,
    pub ir: bool,
}

impl RegimeFlags {
    pub const CLEAN: RegimeFlags = RegimeFlags { uv: false, ir: false };

    pub fn any(&self) -> bool { self.uv || self.ir }

    pub fn merge(self, other: RegimeFlags) -> RegimeFlags {
        RegimeFlags { uv: self.uv || other.uv, ir: self.ir || other.ir }
    }

    /// Flags for a single inverse temperature on `lattice`.
    pub fn for_beta(lattice: &Lattice, beta: f64) -> RegimeFlags {
        let uv_tail = (-beta * lattice.edge_energy()).exp();
        let lambda = thermal_length(lattice.mass(), beta);
        let ir_tail = (-(lattice.length() / lambda).powi(2)).exp();
        RegimeFlags { uv: !(uv_tail < REGIME_GUARD), ir: !(ir_tail < REGIME_GUARD) }
    }

    pub fn for_betas(lattice: &Lattice, betas: &[f64]) -> RegimeFlags {
        betas
            .iter()
            .fold(RegimeFlags::CLEAN, |acc, &b| acc.merge(RegimeFlags::for_beta(lattice, b)))
    }
}

impl fmt::Display for RegimeFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.uv, self.ir) {
            (false, false) => write!(f, "ok"),
            (true, false) => write!(f, "uv"),
            (false, true) => write!(f, "ir"),
            (true, true) => write!(f, "uv+ir"),
        }
    }
}

/// A value together with the regime flags of the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub flags: RegimeFlags,
}

impl<T> Flagged<T> {
    pub fn new(value: T, flags: RegimeFlags) -> Self { Self { value, flags } }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Flagged<U> {
        Flagged { value: f(self.value), flags: self.flags }
    }
}

/// `λ = √(2β/m)`, from `k_B T = 4ħ²/(2mλ²)` with ħ = 1.
pub fn thermal_length(mass: f64, beta: f64) -> f64 {
    (2.0 * beta / mass).sqrt()
}
