//! One-particle retarded Green's function `G>_{AB}(ω)` as discrete spectral lines.
//!
//! On a finite lattice the spectral form is the definition:
//! `G>_{AB}(ω) = (2π/Z) Σ_{kk'} ρ_k δ(ε_k - ε_{k'} + ω) A_{kk'} B_{k'k}`. Lines are never
//! broadened; coincident frequencies are merged by adding weights.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{Basis, Lattice};
use crate::operator::{max_off_diagonal, OperatorMatrix};
use crate::regime::{Flagged, RegimeFlags};
use crate::thermal::{partition_function, reconstruct_from_rkt, TemperatureSplit};

/// Largest off-diagonal the mixed-packet Boltzmann matrix may carry before the
/// wave-packet spectrum is refused.
pub const DIAGONAL_GUARD: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Line {
    pub omega: f64,
    pub weight: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralLines {
    lines: Vec<Line>,
    tolerance: f64,
}

/// `1e-9 (max|ω| + 1)`.
pub fn default_tolerance(lattice: &Lattice) -> f64 {
    let max_eps = (0..lattice.size()).map(|i| lattice.dispersion(i)).fold(0.0, f64::max);
    1e-9 * (max_eps + 1.0)
}

impl SpectralLines {
    /// Sorts raw lines by frequency and merges runs closer than `tolerance` to the
    /// first member of the run.
    pub fn from_raw(mut raw: Vec<Line>, tolerance: f64) -> Self {
        raw.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let mut lines: Vec<Line> = Vec::new();
        for l in raw {
            match lines.last_mut() {
                Some(last) if (l.omega - last.omega).abs() <= tolerance => last.weight += l.weight,
                _ => lines.push(l),
            }
        }
        Self { lines, tolerance }
    }

    pub fn lines(&self) -> &[Line] { &self.lines }
    pub fn tolerance(&self) -> f64 { self.tolerance }
    pub fn len(&self) -> usize { self.lines.len() }
    pub fn is_empty(&self) -> bool { self.lines.is_empty() }

    pub fn total_weight(&self) -> C64 {
        self.lines.iter().map(|l| l.weight).sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.omega).collect()
    }
}

fn check_pair(lattice: &Lattice, a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    a.require_basis(Basis::Momentum)?;
    b.require_basis(Basis::Momentum)?;
    if a.dim() != lattice.size() || b.dim() != lattice.size() {
        return Err(Error::LatticeMismatch);
    }
    Ok(())
}

/// Lines `ω = ε_{k'} - ε_k` with weight `(2π/Z) A_{kk'} (Bρ)_{k'k}`.
fn lines_from_density(lattice: &Lattice, z: f64, a: &DMatrix<C64>, b_rho: &DMatrix<C64>) -> SpectralLines {
    let n = lattice.size();
    let mut raw = Vec::with_capacity(n * n);
    for k in 0..n {
        for kp in 0..n {
            raw.push(Line {
                omega: lattice.dispersion(kp) - lattice.dispersion(k),
                weight: a[(k, kp)] * b_rho[(kp, k)] * (2.0 * PI / z),
            });
        }
    }
    SpectralLines::from_raw(raw, default_tolerance(lattice))
}

pub fn greens_eigen(lattice: &Lattice, beta: f64, a: &OperatorMatrix, b: &OperatorMatrix) -> Result<Flagged<SpectralLines>> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveTemperature(beta));
    }
    check_pair(lattice, a, b)?;
    let n = lattice.size();
    let rho: Vec<f64> = (0..n).map(|k| (-beta * lattice.dispersion(k)).exp()).collect();
    let z: f64 = partition_function(lattice, beta);
    let b_rho = DMatrix::from_fn(n, n, |i, j| b.matrix()[(i, j)] * rho[j]);
    Ok(Flagged::new(lines_from_density(lattice, z, a.matrix(), &b_rho), RegimeFlags::for_beta(lattice, beta)))
}

/// The same spectrum with the Boltzmann operator taken from the mixed-packet
/// representation: each `ρ_k` becomes the `K` sum
/// `(√π λ_K λ_R/(λL))^D Σ_K e^{-β_K ε_K} e^{-β_R ε_{k-K}}` after the `R` integral has
/// collapsed the packet projector onto the diagonal.
pub fn greens_wavepacket(lattice: &Lattice, split: &TemperatureSplit, a: &OperatorMatrix, b: &OperatorMatrix) -> Result<Flagged<SpectralLines>> {
    check_pair(lattice, a, b)?;
    let rho = reconstruct_from_rkt(lattice, split)?;
    let off = max_off_diagonal(rho.value.matrix());
    if off > DIAGONAL_GUARD {
        return Err(Error::IdentityViolated(format!(
            "R integral left off-diagonal weight {off:e} in the mixed-packet Boltzmann matrix"
        )));
    }
    let z = partition_function(lattice, split.beta());
    let b_rho = b.matrix() * rho.value.matrix();
    Ok(Flagged::new(lines_from_density(lattice, z, a.matrix(), &b_rho), rho.flags))
}

/// `2π Tr(A B ρ_th)` with `ρ_th = e^{-βH₀}/Z`.
pub fn sum_rule(lattice: &Lattice, beta: f64, a: &OperatorMatrix, b: &OperatorMatrix) -> Result<C64> {
    check_pair(lattice, a, b)?;
    let z = partition_function(lattice, beta);
    let ab = a.matrix() * b.matrix();
    let tr: C64 = (0..lattice.size()).map(|k| ab[(k, k)] * (-beta * lattice.dispersion(k)).exp()).sum();
    Ok(tr * (2.0 * PI / z))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineError {
    pub omega: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumComparison {
    pub matched: usize,
    pub max_rel_error: f64,
    /// Matched lines whose relative error exceeds the requested tolerance.
    pub failures: Vec<LineError>,
    pub unmatched_a: Vec<f64>,
    pub unmatched_b: Vec<f64>,
}

impl SpectrumComparison {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.unmatched_a.is_empty() && self.unmatched_b.is_empty()
    }
}

/// Weights below this fraction of the largest weight count as zero in comparisons.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Pairs lines by frequency and reports `|w_a - w_b|/max(|w_a|,|w_b|)` per pair.
pub fn compare_spectra(a: &SpectralLines, b: &SpectralLines, tol: f64) -> SpectrumComparison {
    let ftol = a.tolerance.max(b.tolerance);
    let scale = a
        .lines
        .iter()
        .chain(&b.lines)
        .map(|l| l.weight.norm())
        .fold(0.0, f64::max);
    let floor = WEIGHT_FLOOR * scale;
    let mut out = SpectrumComparison {
        matched: 0,
        max_rel_error: 0.0,
        failures: Vec::new(),
        unmatched_a: Vec::new(),
        unmatched_b: Vec::new(),
    };
    let (mut i, mut j) = (0, 0);
    while i < a.lines.len() || j < b.lines.len() {
        match (a.lines.get(i), b.lines.get(j)) {
            (Some(la), Some(lb)) if (la.omega - lb.omega).abs() <= ftol => {
                let (wa, wb) = (la.weight.norm(), lb.weight.norm());
                let rel = if wa < floor && wb < floor { 0.0 } else { (la.weight - lb.weight).norm() / wa.max(wb) };
                out.matched += 1;
                out.max_rel_error = out.max_rel_error.max(rel);
                if !(rel <= tol) {
                    out.failures.push(LineError { omega: la.omega, rel_error: rel });
                }
                i += 1;
                j += 1;
            }
            (Some(la), Some(lb)) if la.omega < lb.omega => {
                out.unmatched_a.push(la.omega);
                i += 1;
            }
            (Some(_), Some(lb)) => {
                out.unmatched_b.push(lb.omega);
                j += 1;
            }
            (Some(la), None) => {
                out.unmatched_a.push(la.omega);
                i += 1;
            }
            (None, Some(lb)) => {
                out.unmatched_b.push(lb.omega);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn projector(lattice: &Lattice, k: usize) -> OperatorMatrix {
        let n = lattice.size();
        let mut m = DMatrix::zeros(n, n);
        m[(k, k)] = C64::new(1.0, 0.0);
        OperatorMatrix::new(Basis::Momentum, m).unwrap()
    }

    fn identity(lattice: &Lattice) -> OperatorMatrix {
        OperatorMatrix::new(Basis::Momentum, DMatrix::identity(lattice.size(), lattice.size())).unwrap()
    }

    #[test]
    fn projector_gives_one_line() {
        let lat = Lattice::new(1, 10.0, 64, 1.0).unwrap();
        let k0 = lat.momentum_index([2, 0, 0]);
        let p = projector(&lat, k0);
        let g = greens_eigen(&lat, 1.0, &p, &p).unwrap().value;
        let nonzero: Vec<_> = g.lines().iter().filter(|l| l.weight.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].omega, 0.0);
        let expect = 2.0 * PI * (-lat.dispersion(k0)).exp() / partition_function(&lat, 1.0);
        assert!((nonzero[0].weight.re - expect).abs() < 1e-15);
    }

    #[test]
    fn identity_puts_all_weight_at_zero() {
        let lat = Lattice::new(1, 8.0, 6, 1.0).unwrap();
        let id = identity(&lat);
        let g = greens_eigen(&lat, 1.0, &id, &id).unwrap().value;
        for l in g.lines() {
            if l.omega != 0.0 {
                assert_eq!(l.weight, C64::new(0.0, 0.0));
            }
        }
        assert!((g.total_weight() - C64::new(2.0 * PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn wavepacket_spectrum_in_a_wide_box() {
        let lat = Lattice::new(1, 20.0, 64, 1.0).unwrap();
        let split = TemperatureSplit::new(1.0, 0.5).unwrap();
        let k0 = lat.momentum_index([3, 0, 0]);
        let p = projector(&lat, k0);
        let e = greens_eigen(&lat, 1.0, &p, &p).unwrap().value;
        let w = greens_wavepacket(&lat, &split, &p, &p).unwrap().value;
        assert_eq!(e.frequencies(), w.frequencies());
        let cmp = compare_spectra(&e, &w, 1e-6);
        assert!(cmp.passed(), "{cmp:?}");
    }

    #[test]
    fn comparison_flags_perturbed_line() {
        let lat = Lattice::new(1, 8.0, 6, 1.0).unwrap();
        let a = DMatrix::from_fn(6, 6, |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
        let a = OperatorMatrix::new(Basis::Momentum, a).unwrap();
        let g = greens_eigen(&lat, 1.0, &a, &a).unwrap().value;
        let same = compare_spectra(&g, &g, 1e-12);
        assert!(same.passed() && same.max_rel_error == 0.0);
        let mut raw = g.lines().to_vec();
        raw[3].weight *= 1.01;
        let bumped = SpectralLines::from_raw(raw, g.tolerance());
        let cmp = compare_spectra(&g, &bumped, 1e-6);
        assert_eq!(cmp.failures.len(), 1);
        assert!(cmp.unmatched_a.is_empty() && cmp.unmatched_b.is_empty());
    }

    #[test]
    fn basis_mismatch_is_rejected() {
        let lat = Lattice::new(1, 8.0, 6, 1.0).unwrap();
        let pos = OperatorMatrix::new(Basis::Position, DMatrix::identity(6, 6)).unwrap();
        assert!(matches!(greens_eigen(&lat, 1.0, &pos, &pos), Err(Error::BasisMismatch { .. })));
    }
}
