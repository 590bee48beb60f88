//! Single-particle wave-packets `|R,K⟩ = a†_{R,K}|v⟩` and their observables.
//!
//! `⟨k|R,K⟩ = e^{-ik·R}⟨k-K|φ⟩` with `k-K` wrapped onto the momentum grid. The
//! thermal families are the same construction with a thermal envelope:
//! `|R,T⟩` uses `|φ_T⟩`, `|R,K,T⟩` uses `L^{-D/2}|φ_T⟩`
//! (see [`Envelope::thermal_packet`]).
//!
//! Position moments on the periodic box use minimum-image displacements about the
//! packet's nominal center, so they only make sense for packets much narrower than
//! the box. [`uncertainty`] refuses packets whose effective thermal width `√8·Δx`
//! exceeds `L/3`; [`position_mean`] only needs the tails beyond `±L/2` to be small and
//! accepts widths up to `2L/3`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;

use crate::envelope::Envelope;
use crate::error::{Error, Result};
use crate::lattice::{dot, AmplitudeField, Basis, Lattice, MomentumLabel, Vector};
use crate::regime::{thermal_length, Flagged, RegimeFlags, REGIME_GUARD};

/// Widest packet (in units of `L`) accepted by minimum-image second moments.
pub const MAX_WIDTH_FRACTION: f64 = 1.0 / 3.0;
/// Same for the first moment alone.
pub const MAX_MEAN_WIDTH_FRACTION: f64 = 2.0 / 3.0;

#[derive(Copy, Clone, Debug)]
pub struct WavePacketParams<'a> {
    /// Mean position `R`; may be off the position grid.
    pub center: Vector,
    /// Mean momentum `K`; must lie on the `2π/L` grid.
    pub momentum: Vector,
    pub envelope: &'a Envelope,
}

impl<'a> WavePacketParams<'a> {
    pub fn new(center: Vector, momentum: Vector, envelope: &'a Envelope) -> Self {
        Self { center, momentum, envelope }
    }

    pub fn lattice(&self) -> &Lattice { self.envelope.lattice() }

    pub fn momentum_label(&self) -> Result<MomentumLabel> {
        self.lattice().momentum_to_label(self.momentum)
    }
}

/// Momentum-basis amplitudes of a packet together with its nominal center, which
/// anchors minimum-image position moments.
#[derive(Clone, Debug, PartialEq)]
pub struct WavePacketState {
    field: AmplitudeField,
    center: Vector,
    momentum: Vector,
}

impl WavePacketState {
    pub fn field(&self) -> &AmplitudeField { &self.field }
    pub fn amplitudes(&self) -> &[C64] { self.field.values() }
    pub fn center(&self) -> Vector { self.center }
    pub fn momentum(&self) -> Vector { self.momentum }
    pub fn lattice(&self) -> &Lattice { self.field.lattice() }
    pub fn norm_sqr(&self) -> f64 { self.field.norm_sqr() }

    pub fn inner(&self, other: &WavePacketState) -> Result<C64> {
        self.field.inner(&other.field)
    }

    pub fn position_field(&self) -> AmplitudeField {
        self.field.to_position().expect("state is stored in the momentum basis")
    }
}

pub fn make_state(params: &WavePacketParams<'_>) -> Result<WavePacketState> {
    let lat = *params.lattice();
    let label = params.momentum_label()?;
    let env = params.envelope;
    let values = (0..lat.size())
        .map(|i| {
            let phase = C64::from_polar(1.0, -dot(lat.momentum(i), params.center));
            phase * env.amplitude(lat.shifted_index(i, label, -1))
        })
        .collect();
    Ok(WavePacketState {
        field: AmplitudeField::new(lat, Basis::Momentum, values)?,
        center: params.center,
        momentum: lat.label_to_momentum(label),
    })
}

/// Normalized overlap kernel
/// `δ_φ(ΔR, ΔK) = ⟨φ|φ⟩^{-1} Σ_p e^{ip·ΔR} ⟨φ|p - ΔK/2⟩⟨p + ΔK/2|φ⟩`.
///
/// The sum runs over `p = q + ΔK/2` with `q` on the grid, so both envelope factors
/// are evaluated at grid points (`q` and `q + ΔK`) for even and odd `ΔK` alike.
pub fn delta_phi(envelope: &Envelope, delta_r: Vector, delta_k: Vector) -> Result<C64> {
    let lat = *envelope.lattice();
    let dk = lat.momentum_to_label(delta_k)?;
    let half = [0.5 * delta_k[0], 0.5 * delta_k[1], 0.5 * delta_k[2]];
    let sum: C64 = (0..lat.size())
        .map(|q| {
            let mut p = lat.momentum(q);
            for a in 0..3 {
                p[a] += half[a];
            }
            C64::from_polar(1.0, dot(p, delta_r))
                * envelope.amplitude(q).conj()
                * envelope.amplitude(lat.shifted_index(q, dk, 1))
        })
        .sum();
    Ok(sum / envelope.norm_sqr())
}

/// `⟨R',K'|R,K⟩ = ⟨φ|φ⟩ e^{i(K'+K)/2·(R'-R)} δ_φ(R'-R, K'-K)` with `bra = (R',K')`.
///
/// Equals the direct inner product exactly when `R' - R` is grid aligned.
pub fn overlap(bra: &WavePacketParams<'_>, ket: &WavePacketParams<'_>) -> Result<C64> {
    if bra.lattice() != ket.lattice() {
        return Err(Error::LatticeMismatch);
    }
    if bra.envelope != ket.envelope {
        return Err(Error::InvalidArgument("overlap needs a common envelope".into()));
    }
    let lat = *bra.lattice();
    let kp = lat.label_to_momentum(bra.momentum_label()?);
    let k = lat.label_to_momentum(ket.momentum_label()?);
    let mut dr = [0.0; 3];
    let mut dk = [0.0; 3];
    let mut mid = [0.0; 3];
    for a in 0..3 {
        dr[a] = bra.center[a] - ket.center[a];
        dk[a] = kp[a] - k[a];
        mid[a] = 0.5 * (kp[a] + k[a]);
    }
    let kernel = delta_phi(bra.envelope, dr, dk)?;
    Ok(bra.envelope.norm_sqr() * C64::from_polar(1.0, dot(mid, dr)) * kernel)
}

/// `Σ_k k |ψ̃(k)|² / Σ_k |ψ̃(k)|²`.
pub fn momentum_mean(state: &WavePacketState) -> Vector {
    let lat = state.lattice();
    let mut num = [0.0; 3];
    let mut den = 0.0;
    for (i, v) in state.amplitudes().iter().enumerate() {
        let w = v.norm_sqr();
        let k = lat.momentum(i);
        for a in 0..3 {
            num[a] += w * k[a];
        }
        den += w;
    }
    num.map(|x| x / den)
}

/// Per-axis first and second central moments of `|ψ(r)|²` about the nominal center.
fn position_moments(state: &WavePacketState, max_fraction: f64) -> Result<(Vector, Vector)> {
    let lat = *state.lattice();
    let psi = state.position_field();
    let mut first = [0.0; 3];
    let mut second = [0.0; 3];
    let mut den = 0.0;
    for (j, v) in psi.values().iter().enumerate() {
        let w = v.norm_sqr();
        let r = lat.position(j);
        let mut d = [0.0; 3];
        for a in 0..lat.dim() {
            d[a] = lat.min_image(r[a] - state.center[a]);
        }
        for a in 0..3 {
            first[a] += w * d[a];
            second[a] += w * d[a] * d[a];
        }
        den += w;
    }
    let mean_offset = first.map(|x| x / den);
    let mut variance = [0.0; 3];
    for a in 0..3 {
        variance[a] = second[a] / den - mean_offset[a] * mean_offset[a];
    }
    let widest = variance.iter().cloned().fold(0.0, f64::max);
    let width = (8.0 * widest).sqrt();
    let limit = max_fraction * lat.length();
    if width > limit {
        return Err(Error::PacketTooWide { width, limit });
    }
    Ok((mean_offset, variance))
}

pub fn position_mean(state: &WavePacketState) -> Result<Vector> {
    let (offset, _) = position_moments(state, MAX_MEAN_WIDTH_FRACTION)?;
    let mut out = state.center;
    for a in 0..3 {
        out[a] += offset[a];
    }
    Ok(out)
}

/// UV flag: the state's weight on the grid edge is not negligible.
fn edge_flags(state: &WavePacketState) -> RegimeFlags {
    let lat = state.lattice();
    let peak = state.amplitudes().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let edge = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| lat.is_edge_mode(*i))
        .map(|(_, v)| v.norm_sqr())
        .fold(0.0, f64::max);
    RegimeFlags { uv: !(edge < REGIME_GUARD * peak), ir: false }
}

fn energy_moments(state: &WavePacketState) -> (f64, f64) {
    let lat = state.lattice();
    let mut den = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (i, v) in state.amplitudes().iter().enumerate() {
        let w = v.norm_sqr();
        let e = lat.dispersion(i);
        den += w;
        m1 += w * e;
        m2 += w * e * e;
    }
    let mean = m1 / den;
    (mean, m2 / den - mean * mean)
}

/// `⟨H₀⟩ = Σ_k ε_k|ψ̃(k)|² / Σ_k|ψ̃(k)|²`.
pub fn energy_mean(state: &WavePacketState) -> Flagged<f64> {
    Flagged::new(energy_moments(state).0, edge_flags(state))
}

/// `⟨H₀²⟩ - ⟨H₀⟩²` with the same normalization as [`energy_mean`].
pub fn energy_variance(state: &WavePacketState) -> Flagged<f64> {
    Flagged::new(energy_moments(state).1, edge_flags(state))
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Uncertainty {
    pub delta_k: Vector,
    pub delta_x: Vector,
    pub product: Vector,
}

pub fn uncertainty(state: &WavePacketState) -> Result<Uncertainty> {
    let lat = *state.lattice();
    let (_, var_x) = position_moments(state, MAX_WIDTH_FRACTION)?;
    let mean_k = momentum_mean(state);
    let mut second = [0.0; 3];
    let mut den = 0.0;
    for (i, v) in state.amplitudes().iter().enumerate() {
        let w = v.norm_sqr();
        let k = lat.momentum(i);
        for a in 0..3 {
            second[a] += w * (k[a] - mean_k[a]).powi(2);
        }
        den += w;
    }
    let mut out = Uncertainty { delta_k: [0.0; 3], delta_x: [0.0; 3], product: [0.0; 3] };
    for a in 0..lat.dim() {
        out.delta_k[a] = (second[a] / den).sqrt();
        out.delta_x[a] = var_x[a].sqrt();
        out.product[a] = out.delta_k[a] * out.delta_x[a];
    }
    Ok(out)
}

/// Free evolution `e^{-iH₀t}`; the nominal center advances classically to `R + Kt/m`.
pub fn evolve(state: &WavePacketState, t: f64) -> WavePacketState {
    let lat = *state.lattice();
    let mut out = state.clone();
    for (i, v) in out.field.values_mut().iter_mut().enumerate() {
        *v *= C64::from_polar(1.0, -lat.dispersion(i) * t);
    }
    for a in 0..3 {
        out.center[a] += state.momentum[a] * t / lat.mass();
    }
    out
}

/// A-priori bound on the minimum-image first-moment error of a freely spreading
/// thermal packet at time `t`: the mass beyond `±L/2` is at most `e^{-L²/(8σ_t²)}` per
/// axis, each unit of it displaced by at most `L`, with
/// `σ_t² = β/(4m) + t²/(mβ)`. Never below `1e-3`.
pub fn drift_tolerance(lattice: &Lattice, beta: f64, t: f64) -> f64 {
    let m = lattice.mass();
    let var = beta / (4.0 * m) + t * t / (m * beta);
    let l = lattice.length();
    let bound = lattice.dim() as f64 * l * (-l * l / (8.0 * var)).exp();
    bound.max(1e-3)
}

/// `|⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩)`.
pub fn fidelity(a: &WavePacketState, b: &WavePacketState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr() / (a.norm_sqr() * b.norm_sqr()))
}

/// Coherent-state label identified with `|R,K,T⟩`: `α = R/λ_T + iλ_T K/√2` per axis.
pub fn coherent_alpha(dim: usize, center: Vector, momentum: Vector, temperature: f64, mass: f64) -> Result<Vec<C64>> {
    if !(temperature > 0.0) {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let lambda = thermal_length(mass, 1.0 / temperature);
    Ok((0..dim)
        .map(|a| C64::new(center[a] / lambda, lambda * momentum[a] * FRAC_1_SQRT_2))
        .collect())
}

/// Canonical oscillator label `α = (mωx_α + ik_α)/√(2mω)`.
pub fn canonical_alpha(dim: usize, center: Vector, momentum: Vector, omega: f64, mass: f64) -> Vec<C64> {
    let norm = (2.0 * mass * omega).sqrt();
    (0..dim)
        .map(|a| C64::new(mass * omega * center[a], momentum[a]) / norm)
        .collect()
}

/// `⟨r|α⟩ = Π_axes e^{-mω(x - x_α)²/2} e^{ik_α(x - x_α)}` on the position grid, with
/// `(x_α, k_α)` recovered from the canonical relation and minimum-image `x - x_α`.
pub fn coherent_wavefunction(lattice: &Lattice, alpha: &[C64], omega: f64) -> Result<AmplitudeField> {
    if alpha.len() != lattice.dim() {
        return Err(Error::InvalidArgument(format!(
            "alpha has {} components for a {}-dimensional lattice",
            alpha.len(),
            lattice.dim()
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("oscillator frequency must be positive, got {omega}")));
    }
    let m = lattice.mass();
    let x_alpha: Vec<f64> = alpha.iter().map(|a| a.re * (2.0 / (m * omega)).sqrt()).collect();
    let k_alpha: Vec<f64> = alpha.iter().map(|a| a.im * (2.0 * m * omega).sqrt()).collect();
    let values = (0..lattice.size())
        .map(|j| {
            let r = lattice.position(j);
            (0..lattice.dim())
                .map(|a| {
                    let d = lattice.min_image(r[a] - x_alpha[a]);
                    C64::from_polar((-0.5 * m * omega * d * d).exp(), k_alpha[a] * d)
                })
                .product::<C64>()
        })
        .collect();
    AmplitudeField::new(*lattice, Basis::Position, values)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FrequencyMatch {
    /// Frequency minimizing the L² distance between the normalized wave functions.
    pub omega_star: f64,
    /// `4/(mλ_T²) = 2k_BT`, from equating Gaussian exponents.
    pub omega_width_matched: f64,
    /// `k_BT`, the frequency quoted alongside the coherent-state identification.
    pub omega_quoted: f64,
    pub distance: f64,
}

fn normalized_distance(a: &AmplitudeField, b: &AmplitudeField) -> f64 {
    let na = a.norm_sqr().sqrt();
    let nb = b.norm_sqr().sqrt();
    let h = a.lattice().cell_volume();
    let s: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x / na - y / nb).norm_sqr())
        .sum();
    (s * h).sqrt()
}

/// Scans the oscillator frequency whose coherent state best matches `|R,K,T⟩`.
pub fn match_frequency(lattice: &Lattice, center: Vector, momentum: Vector, temperature: f64) -> Result<FrequencyMatch> {
    if !(temperature > 0.0) {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let beta = 1.0 / temperature;
    let env = Envelope::thermal_packet(*lattice, beta)?;
    let target = make_state(&WavePacketParams::new(center, momentum, &env))?.position_field();
    let m = lattice.mass();
    let cost = |log_omega: f64| -> f64 {
        let omega = log_omega.exp();
        let alpha = canonical_alpha(lattice.dim(), center, momentum, omega, m);
        let trial = coherent_wavefunction(lattice, &alpha, omega).expect("valid alpha");
        normalized_distance(&target, &trial)
    };

    let lo = (temperature * 1e-2).ln();
    let hi = (temperature * 1e2).ln();
    let steps = 400;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let best = (0..grid.len())
        .min_by(|&i, &j| cost(grid[i]).total_cmp(&cost(grid[j])))
        .unwrap();
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(steps)];

    // golden-section refinement in log ω
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while (b - a).abs() > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let log_star = 0.5 * (a + b);
    let lambda = thermal_length(m, beta);
    Ok(FrequencyMatch {
        omega_star: log_star.exp(),
        omega_width_matched: 4.0 / (m * lambda * lambda),
        omega_quoted: temperature,
        distance: cost(log_star),
    })
}

/// Grid samples `(r, ψ(r))` along axis 0 through the packet center.
pub fn axis_profile(state: &WavePacketState) -> Vec<(f64, C64)> {
    let lat = *state.lattice();
    let psi = state.position_field();
    let h = lat.spacing();
    let mut fixed = [0usize; 3];
    for a in 1..lat.dim() {
        fixed[a] = ((state.center[a] / h).round() as i64).rem_euclid(lat.points() as i64) as usize;
    }
    (0..lat.points())
        .map(|j| {
            let mut axes = fixed;
            axes[0] = j;
            (j as f64 * h, psi.values()[lat.flat_index(axes)])
        })
        .collect()
}
