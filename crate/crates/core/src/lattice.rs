//! Periodic simulation box with dual position and momentum grids.
//!
//! Conventions used everywhere in the crate (ħ = k_B = 1):
//!
//! * positions `r_j = j·L/M`, `j ∈ {0, …, M-1}` per axis;
//! * momenta `k_n = 2πn/L`, `n ∈ [-M/2, M/2)` per axis, stored in fftshift order
//!   (array index `i = n + M/2`);
//! * `ψ(r_j) = Σ_k ψ̃(k) e^{ik·r_j} / L^{D/2}` and its inverse
//!   `ψ̃(k) = (L/M)^D Σ_j ψ(r_j) e^{-ik·r_j} / L^{D/2}`.
//!
//! With these factors the transform is norm preserving when position sums carry the
//! quadrature weight `(L/M)^D` and momentum sums carry weight one:
//! `Σ_j |ψ(r_j)|² (L/M)^D = Σ_n |ψ̃(k_n)|²`.
//!
//! Multi-dimensional arrays are flattened row-major with axis 0 slowest.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Spatial or momentum vector; components beyond the lattice dimension are zero.
pub type Vector = [f64; 3];

/// Integer momentum label `n` per axis (`k = 2πn/L`).
pub type MomentumLabel = [i64; 3];

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Position,
    Momentum,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Lattice {
    dim: usize,
    length: f64,
    points: usize,
    mass: f64,
}

impl Lattice {
    pub fn new(dim: usize, length: f64, points: usize, mass: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidLattice(format!("dimension {dim} outside 1..=3")));
        }
        if points < 4 || points % 2 != 0 {
            return Err(Error::InvalidLattice(format!(
                "grid points per axis must be even and >= 4, got {points}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidLattice(format!("box length must be positive, got {length}")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidLattice(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { dim, length, points, mass })
    }

    pub fn dim(&self) -> usize { self.dim }
    pub fn length(&self) -> f64 { self.length }
    pub fn points(&self) -> usize { self.points }
    pub fn mass(&self) -> f64 { self.mass }

    /// Total number of grid points, `M^D`.
    pub fn size(&self) -> usize { self.points.pow(self.dim as u32) }

    /// Position grid spacing `L/M`.
    pub fn spacing(&self) -> f64 { self.length / self.points as f64 }

    /// Momentum quantum `2π/L`.
    pub fn dk(&self) -> f64 { 2.0 * PI / self.length }

    /// Box volume `L^D`.
    pub fn volume(&self) -> f64 { self.length.powi(self.dim as i32) }

    /// Position quadrature weight `(L/M)^D`.
    pub fn cell_volume(&self) -> f64 { self.spacing().powi(self.dim as i32) }

    /// Largest single-axis kinetic energy on the grid, reached at the `n = -M/2` edge.
    pub fn edge_energy(&self) -> f64 {
        let k = PI * self.points as f64 / self.length;
        k * k / (2.0 * self.mass)
    }

    pub fn axis_indices(&self, idx: usize) -> [usize; 3] {
        let m = self.points;
        let mut out = [0; 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % m;
            rest /= m;
        }
        out
    }

    pub fn flat_index(&self, axes: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.points + axes[a])
    }

    /// Wrap an integer momentum label into `[-M/2, M/2)`.
    pub fn wrap_label(&self, n: i64) -> i64 {
        let m = self.points as i64;
        (n + m / 2).rem_euclid(m) - m / 2
    }

    pub fn momentum_label(&self, idx: usize) -> MomentumLabel {
        let half = (self.points / 2) as i64;
        let axes = self.axis_indices(idx);
        let mut n = [0; 3];
        for a in 0..self.dim {
            n[a] = axes[a] as i64 - half;
        }
        n
    }

    /// Flat momentum index of a label, wrapping each component onto the grid.
    pub fn momentum_index(&self, label: MomentumLabel) -> usize {
        let half = (self.points / 2) as i64;
        let mut axes = [0; 3];
        for a in 0..self.dim {
            axes[a] = (self.wrap_label(label[a]) + half) as usize;
        }
        self.flat_index(axes)
    }

    pub fn momentum(&self, idx: usize) -> Vector {
        self.label_to_momentum(self.momentum_label(idx))
    }

    pub fn label_to_momentum(&self, label: MomentumLabel) -> Vector {
        let dk = self.dk();
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = dk * label[a] as f64;
        }
        k
    }

    /// Integer label of a momentum vector that must sit on the `2π/L` grid.
    pub fn momentum_to_label(&self, k: Vector) -> Result<MomentumLabel> {
        let mut label = [0; 3];
        for a in 0..3 {
            if a >= self.dim {
                if k[a] != 0.0 {
                    return Err(Error::OffGridMomentum(k[a]));
                }
                continue;
            }
            let n = k[a] / self.dk();
            let rounded = n.round();
            if (n - rounded).abs() > 1e-9 * (1.0 + n.abs()) {
                return Err(Error::OffGridMomentum(k[a]));
            }
            label[a] = rounded as i64;
        }
        Ok(label)
    }

    /// Integer position index per axis for a grid-aligned vector (wrapped into the box).
    pub fn position_to_index(&self, r: Vector) -> Result<usize> {
        let mut axes = [0; 3];
        for a in 0..self.dim {
            let j = r[a] / self.spacing();
            let rounded = j.round();
            if (j - rounded).abs() > 1e-9 * (1.0 + j.abs()) {
                return Err(Error::OffGridPosition(r[a]));
            }
            axes[a] = (rounded as i64).rem_euclid(self.points as i64) as usize;
        }
        Ok(self.flat_index(axes))
    }

    pub fn position(&self, idx: usize) -> Vector {
        let h = self.spacing();
        let axes = self.axis_indices(idx);
        let mut r = [0.0; 3];
        for a in 0..self.dim {
            r[a] = h * axes[a] as f64;
        }
        r
    }

    pub fn dispersion(&self, idx: usize) -> f64 {
        self.kinetic(self.momentum(idx))
    }

    /// `ε_k = |k|²/(2m)` for an arbitrary momentum vector.
    pub fn kinetic(&self, k: Vector) -> f64 {
        dot(k, k) / (2.0 * self.mass)
    }

    /// Minimum-image representative of a displacement component in `[-L/2, L/2)`.
    pub fn min_image(&self, d: f64) -> f64 {
        let l = self.length;
        d - l * ((d + 0.5 * l) / l).floor()
    }

    pub fn min_image_vec(&self, d: Vector) -> Vector {
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = self.min_image(d[a]);
        }
        out
    }

    /// Flat index of `wrap(label(idx) + sign·shift)`.
    pub fn shifted_index(&self, idx: usize, shift: MomentumLabel, sign: i64) -> usize {
        let n = self.momentum_label(idx);
        let mut out = [0; 3];
        for a in 0..self.dim {
            out[a] = n[a] + sign * shift[a];
        }
        self.momentum_index(out)
    }

    /// True if any axis sits on the unpaired `n = -M/2` edge.
    pub fn is_edge_mode(&self, idx: usize) -> bool {
        let half = (self.points / 2) as i64;
        let n = self.momentum_label(idx);
        (0..self.dim).any(|a| n[a] == -half)
    }

    /// Flat index of `-k`, or `None` for edge modes which have no partner on the grid.
    pub fn negated_index(&self, idx: usize) -> Option<usize> {
        if self.is_edge_mode(idx) {
            return None;
        }
        let n = self.momentum_label(idx);
        Some(self.momentum_index([-n[0], -n[1], -n[2]]))
    }

    pub fn zero_momentum_index(&self) -> usize {
        self.momentum_index([0; 3])
    }
}

pub fn dot(a: Vector, b: Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Complex amplitudes over the grid of one basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeField {
    lattice: Lattice,
    basis: Basis,
    values: Vec<C64>,
}

impl AmplitudeField {
    pub fn new(lattice: Lattice, basis: Basis, values: Vec<C64>) -> Result<Self> {
        if values.len() != lattice.size() {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                lattice.size(),
                values.len()
            )));
        }
        Ok(Self { lattice, basis, values })
    }

    pub fn zeros(lattice: Lattice, basis: Basis) -> Self {
        Self { lattice, basis, values: vec![C64::new(0.0, 0.0); lattice.size()] }
    }

    pub fn lattice(&self) -> &Lattice { &self.lattice }
    pub fn basis(&self) -> Basis { self.basis }
    pub fn values(&self) -> &[C64] { &self.values }
    pub fn values_mut(&mut self) -> &mut [C64] { &mut self.values }
    pub fn into_values(self) -> Vec<C64> { self.values }

    fn measure(&self) -> f64 {
        match self.basis {
            Basis::Position => self.lattice.cell_volume(),
            Basis::Momentum => 1.0,
        }
    }

    /// `∫|ψ|²` under the basis measure.
    pub fn norm_sqr(&self) -> f64 {
        self.measure() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// `⟨self|other⟩` under the basis measure.
    pub fn inner(&self, other: &AmplitudeField) -> Result<C64> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        if self.basis != other.basis {
            return Err(Error::BasisMismatch { expected: self.basis, found: other.basis });
        }
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.measure())
    }

    pub fn to_position(&self) -> Result<AmplitudeField> {
        if self.basis != Basis::Momentum {
            return Err(Error::BasisMismatch { expected: Basis::Momentum, found: self.basis });
        }
        let lat = self.lattice;
        let mut data = half_roll(&lat, &self.values);
        fft_nd(&lat, &mut data, FftDirection::Inverse);
        let scale = lat.volume().sqrt().recip();
        data.iter_mut().for_each(|v| *v *= scale);
        Ok(AmplitudeField { lattice: lat, basis: Basis::Position, values: data })
    }

    pub fn to_momentum(&self) -> Result<AmplitudeField> {
        if self.basis != Basis::Position {
            return Err(Error::BasisMismatch { expected: Basis::Position, found: self.basis });
        }
        let lat = self.lattice;
        let mut data = self.values.clone();
        fft_nd(&lat, &mut data, FftDirection::Forward);
        let scale = lat.cell_volume() / lat.volume().sqrt();
        data.iter_mut().for_each(|v| *v *= scale);
        Ok(AmplitudeField { lattice: lat, basis: Basis::Momentum, values: half_roll(&lat, &data) })
    }
}

/// Cyclic shift by M/2 along every axis. For even M this map is its own inverse and
/// converts between fftshift order and standard DFT order.
fn half_roll(lat: &Lattice, values: &[C64]) -> Vec<C64> {
    let m = lat.points();
    let mut out = vec![C64::new(0.0, 0.0); values.len()];
    for (idx, v) in values.iter().enumerate() {
        let mut axes = lat.axis_indices(idx);
        for a in 0..lat.dim() {
            axes[a] = (axes[a] + m / 2) % m;
        }
        out[lat.flat_index(axes)] = *v;
    }
    out
}

/// Unnormalized D-dimensional DFT, applied axis by axis.
fn fft_nd(lat: &Lattice, data: &mut [C64], direction: FftDirection) {
    let m = lat.points();
    let dim = lat.dim();
    let fft = FftPlanner::<f64>::new().plan_fft(m, direction);
    let mut line = vec![C64::new(0.0, 0.0); m];
    for axis in 0..dim {
        let stride = m.pow((dim - 1 - axis) as u32);
        let outer = data.len() / (m * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * m * stride + s;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(lat: Lattice, basis: Basis, seed: u64) -> AmplitudeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..lat.size())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        AmplitudeField::new(lat, basis, v).unwrap()
    }

    // O(M^{2D}) reference transform written directly from ⟨r|k⟩ = e^{ik·r}/L^{D/2}.
    fn direct_to_position(field: &AmplitudeField) -> Vec<C64> {
        let lat = *field.lattice();
        (0..lat.size())
            .map(|j| {
                let r = lat.position(j);
                (0..lat.size())
                    .map(|n| field.values()[n] * C64::from_polar(1.0, dot(lat.momentum(n), r)))
                    .sum::<C64>()
                    / lat.volume().sqrt()
            })
            .collect()
    }

    #[test]
    fn grids() {
        let lat = Lattice::new(1, 10.0, 64, 1.0).unwrap();
        assert_eq!(lat.size(), 64);
        for i in 0..64 {
            let n = i as i64 - 32;
            assert_eq!(lat.momentum_label(i)[0], n);
            assert!((lat.momentum(i)[0] - 2.0 * PI * n as f64 / 10.0).abs() < 1e-13);
            assert!((lat.position(i)[0] - i as f64 * 10.0 / 64.0).abs() < 1e-15);
        }
        let lat2 = Lattice::new(2, 8.0, 8, 1.0).unwrap();
        assert_eq!(lat2.size(), 64);
        assert_eq!(lat.dispersion(lat.zero_momentum_index()), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Lattice::new(1, 10.0, 63, 1.0).is_err());
        assert!(Lattice::new(1, 10.0, 2, 1.0).is_err());
        assert!(Lattice::new(0, 10.0, 64, 1.0).is_err());
        assert!(Lattice::new(4, 10.0, 8, 1.0).is_err());
        assert!(Lattice::new(1, 0.0, 64, 1.0).is_err());
        assert!(Lattice::new(1, 10.0, 64, -1.0).is_err());
    }

    #[test]
    fn label_wrapping_and_indices() {
        let lat = Lattice::new(2, 8.0, 8, 1.0).unwrap();
        for idx in 0..lat.size() {
            assert_eq!(lat.momentum_index(lat.momentum_label(idx)), idx);
            assert_eq!(lat.flat_index(lat.axis_indices(idx)), idx);
        }
        assert_eq!(lat.wrap_label(4), -4);
        assert_eq!(lat.wrap_label(-5), 3);
        assert!((lat.min_image(9.0) - 1.0).abs() < 1e-15);
        assert!((lat.min_image(-5.0) - 3.0).abs() < 1e-15);
        assert!(lat.momentum_to_label([2.0 * PI * 3.0 / 8.0, 0.0, 0.0]).is_ok());
        assert!(lat.momentum_to_label([0.3, 0.0, 0.0]).is_err());
    }

    #[test]
    fn single_plane_wave_is_flat() {
        let lat = Lattice::new(1, 10.0, 64, 1.0).unwrap();
        let mut f = AmplitudeField::zeros(lat, Basis::Momentum);
        f.values_mut()[lat.zero_momentum_index()] = C64::new(1.0, 0.0);
        let p = f.to_position().unwrap();
        for v in p.values() {
            assert!((v - C64::new(10f64.powf(-0.5), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for (dim, m) in [(1, 64), (2, 16), (3, 6)] {
            let lat = Lattice::new(dim, 7.5, m, 1.0).unwrap();
            let f = random_field(lat, Basis::Momentum, 11);
            let back = f.to_position().unwrap().to_momentum().unwrap();
            let err = f.values().iter().zip(back.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "dim {dim}: {err}");
        }
    }

    #[test]
    fn transform_matches_direct_sum() {
        let lat = Lattice::new(1, 10.0, 64, 1.0).unwrap();
        let beta = 1.0;
        let amps = (0..lat.size())
            .map(|i| C64::new((-beta * lat.dispersion(i) / 2.0).exp() / lat.volume().sqrt(), 0.0))
            .collect();
        let f = AmplitudeField::new(lat, Basis::Momentum, amps).unwrap();
        let fast = f.to_position().unwrap();
        let slow = direct_to_position(&f);
        let err = fast.values().iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");

        let lat2 = Lattice::new(2, 8.0, 8, 1.3).unwrap();
        let g = random_field(lat2, Basis::Momentum, 5);
        let fast = g.to_position().unwrap();
        let slow = direct_to_position(&g);
        let err = fast.values().iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn parseval_on_random_fields() {
        for seed in 0..100 {
            let dim = 1 + (seed as usize % 3);
            let m = [32, 8, 4][dim - 1];
            let lat = Lattice::new(dim, 3.0 + seed as f64 * 0.1, m, 1.0).unwrap();
            let f = random_field(lat, Basis::Momentum, seed);
            let p = f.to_position().unwrap();
            let rel = (p.norm_sqr() - f.norm_sqr()).abs() / f.norm_sqr();
            assert!(rel < 1e-12, "seed {seed}: {rel}");
        }
    }

    #[test]
    fn shift_theorem_is_cyclic_shift() {
        let lat = Lattice::new(2, 6.0, 8, 1.0).unwrap();
        let f = random_field(lat, Basis::Momentum, 3);
        let shift = [3usize, 5, 0];
        let big_r = [shift[0] as f64 * lat.spacing(), shift[1] as f64 * lat.spacing(), 0.0];
        let mut g = f.clone();
        for (i, v) in g.values_mut().iter_mut().enumerate() {
            *v *= C64::from_polar(1.0, -dot(lat.momentum(i), big_r));
        }
        let pf = f.to_position().unwrap();
        let pg = g.to_position().unwrap();
        for j in 0..lat.size() {
            let mut axes = lat.axis_indices(j);
            for a in 0..2 {
                axes[a] = (axes[a] + lat.points() - shift[a]) % lat.points();
            }
            let src = lat.flat_index(axes);
            assert!((pg.values()[j] - pf.values()[src]).norm() < 1e-12);
        }
    }

    #[test]
    fn basis_mismatch_is_rejected() {
        let lat = Lattice::new(1, 4.0, 8, 1.0).unwrap();
        let f = AmplitudeField::zeros(lat, Basis::Position);
        assert!(matches!(f.to_position(), Err(Error::BasisMismatch { .. })));
        let g = AmplitudeField::zeros(lat, Basis::Momentum);
        assert!(g.to_momentum().is_err());
        assert!(f.inner(&g).is_err());
    }
}
