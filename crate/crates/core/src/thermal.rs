//! The Boltzmann operator `e^{-βH₀}` and its diagonal representations.
//!
//! Three routes to the same operator in the one-particle subspace:
//!
//! * eigenstates: `Σ_k e^{-βε_k}|k⟩⟨k|`;
//! * thermal packets at temperature `T`: `Σ_R (L/M)^D |R,T⟩⟨R,T|`, exact on the lattice
//!   because `Σ_R e^{-i(k-k')·R} = M^D δ_{kk'}`;
//! * mixed packets after splitting `T = T_R + T_K`:
//!   `(√π λ_R λ_K/λ)^D Σ_K e^{-β_K ε_K} Σ_R (L/M)^D |R,K,T_R⟩⟨R,K,T_R|`.
//!
//! The last one rests on a Gaussian convolution identity that is exact in the
//! continuum only. On a periodic box the `K` sum picks up Poisson images whose
//! relative size is about `2e^{-L²/(λ_R² + λ_K²)}` per axis (see
//! [`split_aliasing_estimate`]); it is small only when both split lengths are well
//! inside the box.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::envelope::Envelope;
use crate::error::{Error, Result};
use crate::lattice::{dot, Basis, Lattice, Vector};
use crate::operator::{max_off_diagonal, OperatorMatrix};
use crate::regime::{thermal_length, Flagged, RegimeFlags};

/// Reconstructions build `M^D × M^D` matrices with an `O(M^{3D})` K sum.
pub const MAX_RECONSTRUCTION_SIZE: usize = 512;

pub const MIN_SPLIT: f64 = 0.05;
pub const MAX_SPLIT: f64 = 0.95;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ThermalParams {
    pub lattice: Lattice,
    pub temperature: f64,
    pub beta: f64,
    pub lambda: f64,
    /// `Σ_k e^{-βε_k}` on the lattice.
    pub z_lattice: f64,
    /// `(L/(λ√π))^D`.
    pub z_continuum: f64,
    pub flags: RegimeFlags,
}

pub fn thermal_params(lattice: &Lattice, temperature: f64) -> Result<ThermalParams> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let beta = 1.0 / temperature;
    let lambda = thermal_length(lattice.mass(), beta);
    Ok(ThermalParams {
        lattice: *lattice,
        temperature,
        beta,
        lambda,
        z_lattice: partition_function(lattice, beta),
        z_continuum: (lattice.length() / (lambda * PI.sqrt())).powi(lattice.dim() as i32),
        flags: RegimeFlags::for_beta(lattice, beta),
    })
}

pub fn partition_function(lattice: &Lattice, beta: f64) -> f64 {
    (0..lattice.size()).map(|i| (-beta * lattice.dispersion(i)).exp()).sum()
}

/// `T = T_R + T_K` with `T_K = xT`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TemperatureSplit {
    pub temperature: f64,
    pub fraction: f64,
    pub t_r: f64,
    pub t_k: f64,
}

impl TemperatureSplit {
    pub fn new(temperature: f64, fraction: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::NonPositiveTemperature(temperature));
        }
        if !(MIN_SPLIT..=MAX_SPLIT).contains(&fraction) {
            return Err(Error::InvalidSplit(fraction));
        }
        let t_k = fraction * temperature;
        Ok(Self { temperature, fraction, t_r: temperature - t_k, t_k })
    }

    pub fn beta(&self) -> f64 { 1.0 / self.temperature }
    pub fn beta_r(&self) -> f64 { 1.0 / self.t_r }
    pub fn beta_k(&self) -> f64 { 1.0 / self.t_k }

    /// `(λ, λ_R, λ_K)`.
    pub fn lengths(&self, mass: f64) -> (f64, f64, f64) {
        (
            thermal_length(mass, self.beta()),
            thermal_length(mass, self.beta_r()),
            thermal_length(mass, self.beta_k()),
        )
    }

    /// `(√π λ_R λ_K / λ)^D`.
    pub fn prefactor(&self, lattice: &Lattice) -> f64 {
        let (l, lr, lk) = self.lengths(lattice.mass());
        (PI.sqrt() * lr * lk / l).powi(lattice.dim() as i32)
    }

    pub fn flags(&self, lattice: &Lattice) -> RegimeFlags {
        RegimeFlags::for_betas(lattice, &[self.beta(), self.beta_r(), self.beta_k()])
    }
}

/// Leading Poisson-image correction to the lattice split identity,
/// `2D e^{-L²/(λ_R² + λ_K²)}`.
pub fn split_aliasing_estimate(lattice: &Lattice, split: &TemperatureSplit) -> f64 {
    let (_, lr, lk) = split.lengths(lattice.mass());
    2.0 * lattice.dim() as f64 * (-(lattice.length().powi(2)) / (lr * lr + lk * lk)).exp()
}

/// Exact lattice kernel `⟨r'|e^{-βH₀}|r⟩ = L^{-D} Σ_k e^{-βε_k} e^{ik·(r'-r)}`.
pub fn boltzmann_kernel_r(lattice: &Lattice, beta: f64, r_prime: Vector, r: Vector) -> C64 {
    let d = [r_prime[0] - r[0], r_prime[1] - r[1], r_prime[2] - r[2]];
    let sum: C64 = (0..lattice.size())
        .map(|i| C64::from_polar((-beta * lattice.dispersion(i)).exp(), dot(lattice.momentum(i), d)))
        .sum();
    sum / lattice.volume()
}

/// Continuum form `(Z/L^D) e^{-|Δ|²/λ²}` with `Δ` the minimum-image separation and
/// `Z` the lattice partition function.
pub fn gaussian_kernel(params: &ThermalParams, r_prime: Vector, r: Vector) -> f64 {
    let lat = &params.lattice;
    let d = lat.min_image_vec([r_prime[0] - r[0], r_prime[1] - r[1], r_prime[2] - r[2]]);
    params.z_lattice / lat.volume() * (-dot(d, d) / (params.lambda * params.lambda)).exp()
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct KernelSample {
    pub separation: f64,
    pub exact: f64,
    pub gaussian: f64,
    pub rel_error: f64,
}

/// Exact vs Gaussian kernel along axis 0 for every grid separation in `[0, L/2]`.
pub fn kernel_profile(params: &ThermalParams) -> Vec<KernelSample> {
    let lat = &params.lattice;
    (0..=lat.points() / 2)
        .map(|j| {
            let sep = j as f64 * lat.spacing();
            let r = [sep, 0.0, 0.0];
            let exact = boltzmann_kernel_r(lat, params.beta, r, [0.0; 3]).re;
            let gaussian = gaussian_kernel(params, r, [0.0; 3]);
            KernelSample { separation: sep, exact, gaussian, rel_error: ((gaussian - exact) / exact).abs() }
        })
        .collect()
}

/// `e^{-βH₀}` in the momentum basis (diagonal) or the position-site basis. `β = 0` is
/// allowed and gives the identity.
pub fn boltzmann_matrix(lattice: &Lattice, beta: f64, basis: Basis) -> Result<OperatorMatrix> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::NonPositiveTemperature(beta));
    }
    let n = lattice.size();
    let matrix = match basis {
        Basis::Momentum => DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            (0..n).map(|i| C64::new((-beta * lattice.dispersion(i)).exp(), 0.0)),
        )),
        Basis::Position => {
            // translation invariance: one kernel row determines the matrix
            let w = lattice.cell_volume();
            let row: Vec<C64> = (0..n)
                .map(|j| w * boltzmann_kernel_r(lattice, beta, lattice.position(j), [0.0; 3]))
                .collect();
            DMatrix::from_fn(n, n, |i, j| {
                let ai = lattice.axis_indices(i);
                let aj = lattice.axis_indices(j);
                let mut d = [0usize; 3];
                for a in 0..lattice.dim() {
                    d[a] = (ai[a] + lattice.points() - aj[a]) % lattice.points();
                }
                row[lattice.flat_index(d)]
            })
        }
    };
    OperatorMatrix::new(basis, matrix)
}

fn guard_size(lattice: &Lattice) -> Result<()> {
    if lattice.size() > MAX_RECONSTRUCTION_SIZE {
        return Err(Error::DimensionOverflow {
            size: lattice.size() as u128,
            limit: MAX_RECONSTRUCTION_SIZE as u128,
        });
    }
    Ok(())
}

/// `S(Δ) = Σ_R (L/M)^D e^{-i k_Δ·R}` over the full position grid, indexed by the
/// wrapped momentum difference.
fn position_phase_sums(lattice: &Lattice) -> Vec<C64> {
    let w = lattice.cell_volume();
    (0..lattice.size())
        .map(|d| {
            let k = lattice.momentum(d);
            (0..lattice.size())
                .map(|j| C64::from_polar(w, -dot(k, lattice.position(j))))
                .sum()
        })
        .collect()
}

fn difference_index(lattice: &Lattice, i: usize, j: usize) -> usize {
    lattice.shifted_index(i, lattice.momentum_label(j), -1)
}

/// `Σ_R (L/M)^D |R,T⟩⟨R,T|` in the momentum basis.
pub fn reconstruct_from_rt(lattice: &Lattice, beta: f64) -> Result<OperatorMatrix> {
    guard_size(lattice)?;
    let env = Envelope::thermal(*lattice, beta)?;
    let sums = position_phase_sums(lattice);
    let n = lattice.size();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        env.amplitude(i) * env.amplitude(j).conj() * sums[difference_index(lattice, i, j)]
    });
    OperatorMatrix::new(Basis::Momentum, matrix)
}

/// `(√π λ_R λ_K/λ)^D Σ_K e^{-β_K ε_K} Σ_R (L/M)^D |R,K,T_R⟩⟨R,K,T_R|` in the momentum
/// basis, flagged with the regime of all three temperatures.
pub fn reconstruct_from_rkt(lattice: &Lattice, split: &TemperatureSplit) -> Result<Flagged<OperatorMatrix>> {
    guard_size(lattice)?;
    let env = Envelope::thermal_packet(*lattice, split.beta_r())?;
    let sums = position_phase_sums(lattice);
    let pref = split.prefactor(lattice);
    let n = lattice.size();
    let weights: Vec<f64> = (0..n).map(|k| (-split.beta_k() * lattice.dispersion(k)).exp()).collect();
    let mut matrix = DMatrix::<C64>::zeros(n, n);
    for (kk, &wk) in weights.iter().enumerate() {
        let shift = lattice.momentum_label(kk);
        let col: Vec<C64> = (0..n).map(|i| env.amplitude(lattice.shifted_index(i, shift, -1))).collect();
        for j in 0..n {
            let bj = col[j].conj() * wk;
            for i in 0..n {
                matrix[(i, j)] += col[i] * bj * sums[difference_index(lattice, i, j)];
            }
        }
    }
    matrix *= C64::new(pref, 0.0);
    Ok(Flagged::new(OperatorMatrix::new(Basis::Momentum, matrix)?, split.flags(lattice)))
}

/// Modes with every `|k_a| ≤ πM/(2L)`, the inner half of the grid on each axis.
pub fn in_split_window(lattice: &Lattice, idx: usize) -> bool {
    let label = lattice.momentum_label(idx);
    let half = lattice.points() as i64 / 4;
    (0..lattice.dim()).all(|a| label[a].abs() <= half)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ReconstructionError {
    /// Largest relative diagonal error inside the split window.
    pub diagonal_rel: f64,
    pub off_diagonal_abs: f64,
}

/// Compares a momentum-basis reconstruction against `diag(e^{-βε_k})`.
pub fn reconstruction_error(lattice: &Lattice, beta: f64, recon: &OperatorMatrix) -> Result<ReconstructionError> {
    recon.require_basis(Basis::Momentum)?;
    let m = recon.matrix();
    let diagonal_rel = (0..lattice.size())
        .filter(|&i| in_split_window(lattice, i))
        .map(|i| {
            let exact = (-beta * lattice.dispersion(i)).exp();
            (m[(i, i)] - exact).norm() / exact
        })
        .fold(0.0, f64::max);
    Ok(ReconstructionError { diagonal_rel, off_diagonal_abs: max_off_diagonal(m) })
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SplitPoint {
    pub k: Vector,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
}

/// `e^{-βε_k}` against `(√π λ_K λ_R/(λL))^D Σ_K e^{-β_K ε_K} e^{-β_R ε_{k-K}}` with
/// `k - K` wrapped onto the grid.
pub fn verify_split(lattice: &Lattice, split: &TemperatureSplit, k: Vector) -> Result<Flagged<SplitPoint>> {
    let label = lattice.momentum_to_label(k)?;
    let idx = lattice.momentum_index(label);
    let lhs = (-split.beta() * lattice.dispersion(idx)).exp();
    let sum: f64 = (0..lattice.size())
        .map(|kk| {
            let q = lattice.shifted_index(idx, lattice.momentum_label(kk), -1);
            (-split.beta_k() * lattice.dispersion(kk) - split.beta_r() * lattice.dispersion(q)).exp()
        })
        .sum();
    let rhs = split.prefactor(lattice) / lattice.volume() * sum;
    Ok(Flagged::new(
        SplitPoint { k: lattice.momentum(idx), lhs, rhs, rel_error: ((rhs - lhs) / lhs).abs() },
        split.flags(lattice),
    ))
}

/// Largest [`verify_split`] error over the window `|k_a| ≤ πM/(2L)`.
pub fn split_window_error(lattice: &Lattice, split: &TemperatureSplit) -> Result<Flagged<f64>> {
    let mut worst: f64 = 0.0;
    for i in (0..lattice.size()).filter(|&i| in_split_window(lattice, i)) {
        worst = worst.max(verify_split(lattice, split, lattice.momentum(i))?.value.rel_error);
    }
    Ok(Flagged::new(worst, split.flags(lattice)))
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct KernelSplit {
    pub product_form: f64,
    pub direct: f64,
    pub rel_error: f64,
}

/// `⟨r'|e^{-βH₀}|r⟩` against `(√π λ_R λ_K/λ)^D ⟨r'|e^{-β_R H₀}|r⟩⟨r'|e^{-β_K H₀}|r⟩`,
/// all three kernels evaluated as exact lattice sums.
pub fn kernel_split(lattice: &Lattice, split: &TemperatureSplit, r_prime: Vector, r: Vector) -> Result<Flagged<KernelSplit>> {
    let direct = boltzmann_kernel_r(lattice, split.beta(), r_prime, r).re;
    let kr = boltzmann_kernel_r(lattice, split.beta_r(), r_prime, r).re;
    let kk = boltzmann_kernel_r(lattice, split.beta_k(), r_prime, r).re;
    let product_form = split.prefactor(lattice) * kr * kk;
    Ok(Flagged::new(
        KernelSplit { product_form, direct, rel_error: ((product_form - direct) / direct).abs() },
        split.flags(lattice),
    ))
}
