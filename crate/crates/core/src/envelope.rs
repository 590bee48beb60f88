//! Envelope states `|φ⟩` fixing a wave-packet's momentum distribution.
//!
//! Envelopes are stored as momentum amplitudes `⟨k|φ⟩`; position profiles are always
//! derived through the lattice transform.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{AmplitudeField, Basis, Lattice, MomentumLabel};

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum EnvelopeKind {
    Generic,
    DeltaPeaked,
    /// `scale · e^{-βH₀/2}|r = 0⟩`; `scale = 1` is the bare `|φ_T⟩`.
    Thermal { beta: f64, scale: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    lattice: Lattice,
    amplitudes: Vec<C64>,
    kind: EnvelopeKind,
}

impl Envelope {
    /// `⟨k|φ⟩ = δ_{k,0}`.
    pub fn delta(lattice: Lattice) -> Envelope {
        let mut amplitudes = vec![C64::new(0.0, 0.0); lattice.size()];
        amplitudes[lattice.zero_momentum_index()] = C64::new(1.0, 0.0);
        Envelope { lattice, amplitudes, kind: EnvelopeKind::DeltaPeaked }
    }

    /// `⟨k|φ_T⟩ = e^{-βε_k/2} L^{-D/2}`.
    pub fn thermal(lattice: Lattice, beta: f64) -> Result<Envelope> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::NonPositiveTemperature(beta));
        }
        let norm = lattice.volume().sqrt().recip();
        let amplitudes = (0..lattice.size())
            .map(|i| C64::new((-0.5 * beta * lattice.dispersion(i)).exp() * norm, 0.0))
            .collect();
        Ok(Envelope { lattice, amplitudes, kind: EnvelopeKind::Thermal { beta, scale: 1.0 } })
    }

    /// The envelope `L^{-D/2}|φ_T⟩` carried by the `|R,K,T⟩` states.
    pub fn thermal_packet(lattice: Lattice, beta: f64) -> Result<Envelope> {
        Ok(Envelope::thermal(lattice, beta)?.scaled(lattice.volume().sqrt().recip()))
    }

    /// Arbitrary envelope; must be nonzero and symmetric under `k → -k`.
    pub fn from_amplitudes(lattice: Lattice, amplitudes: Vec<C64>) -> Result<Envelope> {
        if amplitudes.len() != lattice.size() {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                lattice.size(),
                amplitudes.len()
            )));
        }
        let env = Envelope { lattice, amplitudes, kind: EnvelopeKind::Generic };
        if env.norm_sqr() <= 0.0 {
            return Err(Error::ZeroEnvelope);
        }
        env.check_symmetry()?;
        Ok(env)
    }

    pub fn lattice(&self) -> &Lattice { &self.lattice }
    pub fn kind(&self) -> EnvelopeKind { self.kind }
    pub fn amplitudes(&self) -> &[C64] { &self.amplitudes }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            EnvelopeKind::Thermal { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn amplitude(&self, idx: usize) -> C64 { self.amplitudes[idx] }

    /// `⟨q|φ⟩` for an integer label, wrapped onto the grid.
    pub fn at_label(&self, label: MomentumLabel) -> C64 {
        self.amplitudes[self.lattice.momentum_index(label)]
    }

    /// `⟨φ|φ⟩ = Σ_k |⟨k|φ⟩|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Envelope {
        let kind = match self.kind {
            EnvelopeKind::Thermal { beta, scale } => EnvelopeKind::Thermal { beta, scale: scale * factor },
            other => other,
        };
        Envelope {
            lattice: self.lattice,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            kind,
        }
    }

    /// Copy rescaled to `⟨φ|φ⟩ = 1`.
    pub fn normalized(&self) -> Envelope {
        self.scaled(self.norm_sqr().sqrt().recip())
    }

    /// Largest `|⟨k|φ⟩ - ⟨-k|φ⟩|` over grid points whose negation is on the grid.
    /// The `n = -M/2` edge modes have no partner and are skipped.
    pub fn symmetry_deviation(&self) -> f64 {
        (0..self.lattice.size())
            .filter_map(|i| self.lattice.negated_index(i).map(|j| (self.amplitudes[i] - self.amplitudes[j]).norm()))
            .fold(0.0, f64::max)
    }

    pub fn check_symmetry(&self) -> Result<()> {
        let scale = self.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let dev = self.symmetry_deviation();
        if dev > 1e-12 * scale {
            return Err(Error::AsymmetricEnvelope(dev));
        }
        Ok(())
    }

    pub fn momentum_field(&self) -> AmplitudeField {
        AmplitudeField::new(self.lattice, Basis::Momentum, self.amplitudes.clone())
            .expect("envelope length matches lattice")
    }

    /// `⟨r|φ⟩` on the position grid.
    pub fn position_profile(&self) -> AmplitudeField {
        self.momentum_field().to_position().expect("momentum field")
    }

    /// Spatial variance `Σ_j |r_j|²|⟨r_j|φ⟩|²/Σ_j|⟨r_j|φ⟩|²` with minimum-image
    /// coordinates about the origin, summed over axes.
    pub fn position_variance(&self) -> f64 {
        let profile = self.position_profile();
        let lat = self.lattice;
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, v) in profile.values().iter().enumerate() {
            let d = lat.min_image_vec(lat.position(j));
            let w = v.norm_sqr();
            num += w * crate::lattice::dot(d, d);
            den += w;
        }
        num / den
    }
}
