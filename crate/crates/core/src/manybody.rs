//! Symmetrized N-particle subspaces and wave-packet operator algebra.
//!
//! Basis states are `|c⟩ = (Π n_k!)^{-1/2} a†_{c₁}…a†_{c_N}|v⟩` with `c` a
//! nondecreasing (bosons) or strictly increasing (fermions) list of momentum grid
//! indices. Creation operators act in ascending index order, which fixes the fermion
//! phase. Products of wave-packet creation operators overlap with these states through
//! permanents and determinants of single-particle amplitudes.
//!
//! Fermion products with a repeated label vanish identically, so coincident labels need
//! no special handling; for bosons they enter with their natural multiplicity.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::envelope::Envelope;
use crate::error::{Error, Result};
use crate::lattice::{Basis, Lattice};
use crate::operator::{max_abs, OperatorMatrix};
use crate::regime::{Flagged, RegimeFlags};
use crate::thermal::TemperatureSplit;
use crate::wavepacket::{make_state, WavePacketParams};

pub const MAX_PARTICLES: usize = 6;
/// Largest `M^D` admitted by the nested N-particle sums.
pub const MAX_SUM_MODES: usize = 16;
pub const MAX_SUM_PARTICLES: usize = 3;
pub const MAX_FOCK_DIM: usize = 5000;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Statistics {
    Boson,
    Fermion,
}

impl std::str::FromStr for Statistics {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boson" | "bosons" => Ok(Statistics::Boson),
            "fermion" | "fermions" => Ok(Statistics::Fermion),
            other => Err(Error::InvalidArgument(format!("unknown statistics '{other}'"))),
        }
    }
}

impl std::fmt::Display for Statistics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Statistics::Boson => "boson",
            Statistics::Fermion => "fermion",
        })
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Clone, Debug)]
pub struct FockBasis {
    particles: usize,
    statistics: Statistics,
    modes: usize,
    configs: Vec<Vec<usize>>,
    norms: Vec<f64>,
    index: HashMap<Vec<usize>, usize>,
}

impl FockBasis {
    pub fn new(modes: usize, particles: usize, statistics: Statistics) -> Result<Self> {
        if particles == 0 || particles > MAX_PARTICLES {
            return Err(Error::InvalidArgument(format!(
                "particle number must be in 1..={MAX_PARTICLES}, got {particles}"
            )));
        }
        let dim = match statistics {
            Statistics::Boson => binomial((modes + particles - 1) as u128, particles as u128),
            Statistics::Fermion => binomial(modes as u128, particles as u128),
        };
        if dim > MAX_FOCK_DIM as u128 {
            return Err(Error::DimensionOverflow { size: dim, limit: MAX_FOCK_DIM as u128 });
        }
        if dim == 0 {
            return Err(Error::InvalidArgument(format!("no {particles}-fermion states on {modes} modes")));
        }
        let mut configs = Vec::with_capacity(dim as usize);
        let mut current = Vec::with_capacity(particles);
        enumerate(modes, particles, statistics, 0, &mut current, &mut configs);
        let norms = configs
            .iter()
            .map(|c| {
                let mut prod = 1.0;
                let mut run = 1.0;
                for w in 1..c.len() {
                    if c[w] == c[w - 1] {
                        run += 1.0;
                        prod *= run;
                    } else {
                        run = 1.0;
                    }
                }
                f64::sqrt(prod)
            })
            .collect();
        let index = configs.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Ok(Self { particles, statistics, modes, configs, norms, index })
    }

    pub fn particles(&self) -> usize { self.particles }
    pub fn statistics(&self) -> Statistics { self.statistics }
    pub fn modes(&self) -> usize { self.modes }
    pub fn dim(&self) -> usize { self.configs.len() }
    pub fn configs(&self) -> &[Vec<usize>] { &self.configs }
    pub fn config(&self, i: usize) -> &[usize] { &self.configs[i] }

    /// `√(Π n_k!)` for configuration `i`.
    pub fn norm(&self, i: usize) -> f64 { self.norms[i] }

    pub fn position(&self, config: &[usize]) -> Option<usize> { self.index.get(config).copied() }

    /// `⟨c|a†(f₁)…a†(f_N)|v⟩` for every basis configuration.
    pub fn project(&self, factors: &[&[C64]]) -> Result<Vec<C64>> {
        if factors.len() != self.particles {
            return Err(Error::ParticleMismatch(self.particles, factors.len()));
        }
        let n = self.particles;
        let mut g = DMatrix::<C64>::zeros(n, n);
        Ok((0..self.dim())
            .map(|ci| {
                let c = &self.configs[ci];
                for i in 0..n {
                    for j in 0..n {
                        g[(i, j)] = factors[j][c[i]];
                    }
                }
                symmetric_form(&g, self.statistics) / self.norms[ci]
            })
            .collect())
    }
}

fn enumerate(modes: usize, left: usize, stats: Statistics, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if left == 0 {
        out.push(cur.clone());
        return;
    }
    for k in start..modes {
        cur.push(k);
        let next = match stats {
            Statistics::Boson => k,
            Statistics::Fermion => k + 1,
        };
        enumerate(modes, left - 1, stats, next, cur, out);
        cur.pop();
    }
}

/// Permanent by direct expansion below `n = 4`, Ryser with Gray-code updates above.
pub fn permanent(a: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    assert!(a.is_square(), "permanent of a non-square matrix");
    assert!(n <= MAX_PARTICLES, "permanent limited to n <= {MAX_PARTICLES}");
    match n {
        0 => C64::new(1.0, 0.0),
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] + a[(0, 1)] * a[(1, 0)],
        3 => {
            a[(0, 0)] * (a[(1, 1)] * a[(2, 2)] + a[(1, 2)] * a[(2, 1)])
                + a[(0, 1)] * (a[(1, 0)] * a[(2, 2)] + a[(1, 2)] * a[(2, 0)])
                + a[(0, 2)] * (a[(1, 0)] * a[(2, 1)] + a[(1, 1)] * a[(2, 0)])
        }
        _ => ryser(a),
    }
}

fn ryser(a: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut row_sums = vec![C64::new(0.0, 0.0); n];
    let mut in_set = vec![false; n];
    let mut total = C64::new(0.0, 0.0);
    let mut size = 0usize;
    let mut gray = 0u64;
    for step in 1u64..(1 << n) {
        let next = step ^ (step >> 1);
        let j = (gray ^ next).trailing_zeros() as usize;
        gray = next;
        if in_set[j] {
            in_set[j] = false;
            size -= 1;
            for i in 0..n {
                row_sums[i] -= a[(i, j)];
            }
        } else {
            in_set[j] = true;
            size += 1;
            for i in 0..n {
                row_sums[i] += a[(i, j)];
            }
        }
        let prod: C64 = row_sums.iter().product();
        if size % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

pub fn determinant(a: &DMatrix<C64>) -> C64 {
    if a.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    a.clone().determinant()
}

fn symmetric_form(a: &DMatrix<C64>, stats: Statistics) -> C64 {
    match stats {
        Statistics::Boson => permanent(a),
        Statistics::Fermion => determinant(a),
    }
}

/// `a†(f₁)…a†(f_N)|v⟩` for single-particle amplitude vectors `f_i` in the momentum basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    factors: Vec<Vec<C64>>,
    statistics: Statistics,
}

impl ProductState {
    pub fn new(factors: Vec<Vec<C64>>, statistics: Statistics) -> Result<Self> {
        if factors.is_empty() || factors.len() > MAX_PARTICLES {
            return Err(Error::InvalidArgument(format!("product of {} factors", factors.len())));
        }
        let len = factors[0].len();
        for f in &factors {
            if f.len() != len {
                return Err(Error::LatticeMismatch);
            }
            if f.iter().all(|z| z.norm_sqr() == 0.0) {
                return Err(Error::ZeroEnvelope);
            }
        }
        Ok(Self { factors, statistics })
    }

    pub fn particles(&self) -> usize { self.factors.len() }
    pub fn statistics(&self) -> Statistics { self.statistics }
    pub fn factors(&self) -> &[Vec<C64>] { &self.factors }
}

/// `⟨a|b⟩` as the permanent or determinant of `G_ij = ⟨a_i|b_j⟩`.
pub fn product_overlap(a: &ProductState, b: &ProductState) -> Result<C64> {
    if a.particles() != b.particles() {
        return Err(Error::ParticleMismatch(a.particles(), b.particles()));
    }
    if a.statistics != b.statistics {
        return Err(Error::StatisticsMismatch);
    }
    let n = a.particles();
    let g = DMatrix::from_fn(n, n, |i, j| {
        a.factors[i].iter().zip(&b.factors[j]).map(|(x, y)| x.conj() * y).sum::<C64>()
    });
    Ok(symmetric_form(&g, a.statistics))
}

/// A weighted single-particle family `{(w_ℓ, |ℓ⟩)}` whose N-fold sums are assembled.
#[derive(Clone, Debug)]
pub struct Family {
    pub weights: Vec<f64>,
    pub states: Vec<Vec<C64>>,
}

impl Family {
    pub fn len(&self) -> usize { self.states.len() }
    pub fn is_empty(&self) -> bool { self.states.is_empty() }

    /// `Σ_ℓ w_ℓ |ℓ⟩⟨ℓ|` in the momentum basis.
    pub fn one_particle_sum(&self) -> DMatrix<C64> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for (w, s) in self.weights.iter().zip(&self.states) {
            let v = nalgebra::DVector::from_column_slice(s);
            acc.gerc(C64::new(*w, 0.0), &v, &v, C64::new(1.0, 0.0));
        }
        acc
    }
}

fn check_stride(lattice: &Lattice, stride: usize) -> Result<()> {
    if stride == 0 || lattice.points() % stride != 0 {
        return Err(Error::InvalidArgument(format!(
            "R stride {stride} must divide M = {}",
            lattice.points()
        )));
    }
    Ok(())
}

/// Grid positions visited with stride `s` on every axis, and the matching weight factor `s^D`.
fn strided_positions(lattice: &Lattice, stride: usize) -> (Vec<usize>, f64) {
    let idx = (0..lattice.size())
        .filter(|&j| {
            let a = lattice.axis_indices(j);
            (0..lattice.dim()).all(|d| a[d] % stride == 0)
        })
        .collect();
    (idx, (stride as f64).powi(lattice.dim() as i32))
}

fn packet(envelope: &Envelope, r: usize, k: usize) -> Result<Vec<C64>> {
    let lat = envelope.lattice();
    let p = WavePacketParams::new(lat.position(r), lat.momentum(k), envelope);
    Ok(make_state(&p)?.field().clone().into_values())
}

/// `{(M^{-D}, |R,K⟩)}` over all `K` and the (strided) `R` grid.
pub fn closure_family(envelope: &Envelope, stride: usize) -> Result<Family> {
    let lat = *envelope.lattice();
    check_stride(&lat, stride)?;
    let (rs, thin) = strided_positions(&lat, stride);
    let w = thin / lat.size() as f64;
    let mut fam = Family { weights: Vec::new(), states: Vec::new() };
    for k in 0..lat.size() {
        for &r in &rs {
            fam.weights.push(w);
            fam.states.push(packet(envelope, r, k)?);
        }
    }
    Ok(fam)
}

/// `{((L/M)^D, |R,T⟩)}`.
pub fn rt_family(lattice: &Lattice, beta: f64, stride: usize) -> Result<Family> {
    check_stride(lattice, stride)?;
    let env = Envelope::thermal(*lattice, beta)?;
    let (rs, thin) = strided_positions(lattice, stride);
    let w = thin * lattice.cell_volume();
    let k0 = lattice.zero_momentum_index();
    let mut fam = Family { weights: Vec::new(), states: Vec::new() };
    for &r in &rs {
        fam.weights.push(w);
        fam.states.push(packet(&env, r, k0)?);
    }
    Ok(fam)
}

/// `{((√π λ_R λ_K/λ)^D e^{-β_K ε_K} (L/M)^D, |R,K,T_R⟩)}`.
pub fn rkt_family(lattice: &Lattice, split: &TemperatureSplit, stride: usize) -> Result<Family> {
    check_stride(lattice, stride)?;
    let env = Envelope::thermal_packet(*lattice, split.beta_r())?;
    let (rs, thin) = strided_positions(lattice, stride);
    let base = thin * lattice.cell_volume() * split.prefactor(lattice);
    let mut fam = Family { weights: Vec::new(), states: Vec::new() };
    for k in 0..lattice.size() {
        let w = base * (-split.beta_k() * lattice.dispersion(k)).exp();
        for &r in &rs {
            fam.weights.push(w);
            fam.states.push(packet(&env, r, k)?);
        }
    }
    Ok(fam)
}

/// `(1/N!) Σ_{ℓ₁…ℓ_N} Π w_{ℓ_i} |ℓ₁…ℓ_N⟩⟨ℓ₁…ℓ_N|` on `basis`.
pub fn assemble_n(basis: &FockBasis, family: &Family) -> Result<DMatrix<C64>> {
    let n = basis.particles();
    let count = family.len() as u128;
    let tuples = count.pow(n as u32);
    let work = tuples * (basis.dim() as u128).pow(2);
    const WORK_LIMIT: u128 = 20_000_000_000;
    if work > WORK_LIMIT {
        return Err(Error::DimensionOverflow { size: work, limit: WORK_LIMIT });
    }
    let dim = basis.dim();
    let mut acc = DMatrix::<C64>::zeros(dim, dim);
    let mut idx = vec![0usize; n];
    let factorial: f64 = (1..=n).map(|i| i as f64).product();
    loop {
        let weight: f64 = idx.iter().map(|&i| family.weights[i]).product();
        if weight != 0.0 {
            let factors: Vec<&[C64]> = idx.iter().map(|&i| family.states[i].as_slice()).collect();
            let v = nalgebra::DVector::from_vec(basis.project(&factors)?);
            acc.gerc(C64::new(weight / factorial, 0.0), &v, &v, C64::new(1.0, 0.0));
        }
        // odometer over label tuples
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(acc);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < family.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn check_sum_size(lattice: &Lattice, n: usize) -> Result<()> {
    if lattice.size() > MAX_SUM_MODES {
        return Err(Error::DimensionOverflow { size: lattice.size() as u128, limit: MAX_SUM_MODES as u128 });
    }
    if n > MAX_SUM_PARTICLES {
        return Err(Error::DimensionOverflow { size: n as u128, limit: MAX_SUM_PARTICLES as u128 });
    }
    Ok(())
}

fn require_normalized(envelope: &Envelope) -> Result<()> {
    let norm = envelope.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("closure needs a normalized envelope, ⟨φ|φ⟩ = {norm}")));
    }
    Ok(())
}

/// `max |Σ_K M^{-D} Σ_R |R,K⟩⟨R,K| - I|`.
pub fn number_operator_check(envelope: &Envelope) -> Result<f64> {
    require_normalized(envelope)?;
    let fam = closure_family(envelope, 1)?;
    let n = envelope.lattice().size();
    Ok(max_abs(&(fam.one_particle_sum() - DMatrix::identity(n, n))))
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ClosureReport {
    pub max_error: f64,
    pub dim: usize,
    /// False when the R grid was thinned; such sums are not expected to be exact.
    pub exact: bool,
}

/// N-particle closure `(1/N!) Σ_{K_i} Σ_{R_i} M^{-ND} |…⟩⟨…|` against the identity on the Fock basis.
pub fn closure_n(envelope: &Envelope, particles: usize, statistics: Statistics, stride: usize) -> Result<ClosureReport> {
    require_normalized(envelope)?;
    let lat = envelope.lattice();
    check_sum_size(lat, particles)?;
    let basis = FockBasis::new(lat.size(), particles, statistics)?;
    let recon = assemble_n(&basis, &closure_family(envelope, stride)?)?;
    let dim = basis.dim();
    Ok(ClosureReport {
        max_error: max_abs(&(recon - DMatrix::identity(dim, dim))),
        dim,
        exact: stride == 1,
    })
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Representation {
    Eigen,
    PositionPackets,
    MixedPackets(TemperatureSplit),
}

/// `e^{-βH₀}` on the N-particle Fock basis built from eigenstates or packet families.
pub fn boltzmann_n(basis: &FockBasis, lattice: &Lattice, beta: f64, representation: Representation, stride: usize) -> Result<Flagged<DMatrix<C64>>> {
    if basis.modes() != lattice.size() {
        return Err(Error::LatticeMismatch);
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositiveTemperature(beta));
    }
    match representation {
        Representation::Eigen => {
            let diag = nalgebra::DVector::from_iterator(
                basis.dim(),
                basis.configs().iter().map(|c| {
                    C64::new((-beta * c.iter().map(|&k| lattice.dispersion(k)).sum::<f64>()).exp(), 0.0)
                }),
            );
            Ok(Flagged::new(DMatrix::from_diagonal(&diag), RegimeFlags::for_beta(lattice, beta)))
        }
        Representation::PositionPackets => {
            check_sum_size(lattice, basis.particles())?;
            let m = assemble_n(basis, &rt_family(lattice, beta, stride)?)?;
            Ok(Flagged::new(m, RegimeFlags::for_beta(lattice, beta)))
        }
        Representation::MixedPackets(split) => {
            if ((split.beta() - beta) / beta).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "split temperature {} does not match β = {beta}",
                    split.temperature
                )));
            }
            check_sum_size(lattice, basis.particles())?;
            let m = assemble_n(basis, &rkt_family(lattice, &split, stride)?)?;
            Ok(Flagged::new(m, split.flags(lattice)))
        }
    }
}

/// Mid-label prefactor and `q` sum shared by overlaps and H₀ elements:
/// `e^{i(K'+K)/2·ΔR} Σ_q e^{i(q+ΔK/2)·ΔR} f(q) φ*(q) φ(q+ΔK)`.
fn q_sum(envelope: &Envelope, bra: (&[f64; 3], &[f64; 3]), ket: (&[f64; 3], &[f64; 3]), f: impl Fn(usize) -> f64) -> Result<C64> {
    let lat = *envelope.lattice();
    let kp_label = lat.momentum_to_label(*bra.1)?;
    let k_label = lat.momentum_to_label(*ket.1)?;
    let kp = lat.label_to_momentum(kp_label);
    let k = lat.label_to_momentum(k_label);
    let dk_label = [kp_label[0] - k_label[0], kp_label[1] - k_label[1], kp_label[2] - k_label[2]];
    let mut dr = [0.0; 3];
    let mut mid = [0.0; 3];
    let mut half = [0.0; 3];
    for a in 0..3 {
        dr[a] = bra.0[a] - ket.0[a];
        mid[a] = 0.5 * (kp[a] + k[a]);
        half[a] = 0.5 * (kp[a] - k[a]);
    }
    let sum: C64 = (0..lat.size())
        .map(|q| {
            let mut p = lat.momentum(q);
            for a in 0..3 {
                p[a] += half[a];
            }
            C64::from_polar(f(lat.shifted_index(q, kp_label, 1)), crate::lattice::dot(p, dr))
                * envelope.amplitude(q).conj()
                * envelope.amplitude(lat.shifted_index(q, dk_label, 1))
        })
        .sum();
    Ok(C64::from_polar(1.0, crate::lattice::dot(mid, dr)) * sum)
}

/// `⟨R',K'|H₀|R,K⟩`, evaluated as a sum over the envelope grid with `ε` taken at the
/// wrapped bra-side momentum `q + K'`.
pub fn h0_wavepacket_element(envelope: &Envelope, bra: &WavePacketParams<'_>, ket: &WavePacketParams<'_>) -> Result<C64> {
    if bra.envelope != envelope || ket.envelope != envelope {
        return Err(Error::InvalidArgument("H₀ elements need a common envelope".into()));
    }
    let lat = *envelope.lattice();
    q_sum(envelope, (&bra.center, &bra.momentum), (&ket.center, &ket.momentum), |i| lat.dispersion(i))
}

/// `u_q = e^{iq·R'}⟨R',K'-q|R,K⟩`, the matrix element of `e^{iq·r̂}`.
pub fn u_q_amplitude(envelope: &Envelope, q: [f64; 3], bra: &WavePacketParams<'_>, ket: &WavePacketParams<'_>) -> Result<C64> {
    let lat = *envelope.lattice();
    let q_label = lat.momentum_to_label(q)?;
    let kp = lat.momentum_to_label(bra.momentum)?;
    let shifted = lat.label_to_momentum([kp[0] - q_label[0], kp[1] - q_label[1], kp[2] - q_label[2]]);
    let inner = q_sum(envelope, (&bra.center, &shifted), (&ket.center, &ket.momentum), |_| 1.0)?;
    Ok(C64::from_polar(1.0, crate::lattice::dot(q, bra.center)) * inner)
}

/// Wave-packet labels `(R index, K index)` over the full grids.
pub fn packet_labels(lattice: &Lattice) -> Vec<(usize, usize)> {
    (0..lattice.size())
        .flat_map(|k| (0..lattice.size()).map(move |r| (r, k)))
        .collect()
}

/// `𝒱[(ℓ₁',ℓ₂'),(ℓ₁,ℓ₂)] = Σ_q V_q u_q(ℓ₁',ℓ₁) u_{-q}(ℓ₂',ℓ₂)` over all packet labels,
/// as a `n_ℓ² × n_ℓ²` matrix with pair index `ℓ_a·n_ℓ + ℓ_b`. `potential[q]` is `V_q`
/// indexed like the momentum grid.
pub fn v_wavepacket_tensor(envelope: &Envelope, potential: &[C64]) -> Result<DMatrix<C64>> {
    let lat = *envelope.lattice();
    if potential.len() != lat.size() {
        return Err(Error::InvalidArgument("potential length differs from the momentum grid".into()));
    }
    check_sum_size(&lat, 2)?;
    let labels = packet_labels(&lat);
    let nl = labels.len();
    let params: Vec<WavePacketParams<'_>> = labels
        .iter()
        .map(|&(r, k)| WavePacketParams::new(lat.position(r), lat.momentum(k), envelope))
        .collect();
    // u[q][ℓ'·nl + ℓ]
    let mut u = Vec::with_capacity(lat.size());
    for q in 0..lat.size() {
        let qv = lat.momentum(q);
        let mut table = Vec::with_capacity(nl * nl);
        for bra in &params {
            for ket in &params {
                table.push(u_q_amplitude(envelope, qv, bra, ket)?);
            }
        }
        u.push(table);
    }
    let mut tensor = DMatrix::<C64>::zeros(nl * nl, nl * nl);
    for q in 0..lat.size() {
        if potential[q] == C64::new(0.0, 0.0) {
            continue;
        }
        let mq = lat.negated_index(q).unwrap_or(q);
        let (uq, umq) = (&u[q], &u[mq]);
        for a in 0..nl {
            for b in 0..nl {
                let row = a * nl + b;
                for c in 0..nl {
                    let left = potential[q] * uq[a * nl + c];
                    for d in 0..nl {
                        tensor[(row, c * nl + d)] += left * umq[b * nl + d];
                    }
                }
            }
        }
    }
    Ok(tensor)
}

/// `½ M^{-4D} Σ 𝒱 a†_{ℓ₁'}a†_{ℓ₂'}a_{ℓ₂}a_{ℓ₁}` on a two-particle basis, contracted as
/// `P 𝒱 P†` with `P[c, (ℓ_a,ℓ_b)] = ⟨c|a†_{ℓ_a}a†_{ℓ_b}|v⟩`.
pub fn reassemble_v(basis: &FockBasis, envelope: &Envelope, tensor: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    require_normalized(envelope)?;
    if basis.particles() != 2 {
        return Err(Error::ParticleMismatch(2, basis.particles()));
    }
    let lat = *envelope.lattice();
    let labels = packet_labels(&lat);
    let nl = labels.len();
    if tensor.nrows() != nl * nl {
        return Err(Error::InvalidArgument("tensor does not match the label set".into()));
    }
    let states: Vec<Vec<C64>> = labels.iter().map(|&(r, k)| packet(envelope, r, k)).collect::<Result<_>>()?;
    let mut p = DMatrix::<C64>::zeros(basis.dim(), nl * nl);
    for a in 0..nl {
        for b in 0..nl {
            let col = basis.project(&[&states[a], &states[b]])?;
            for (c, v) in col.into_iter().enumerate() {
                p[(c, a * nl + b)] = v;
            }
        }
    }
    let w = (lat.size() as f64).powi(-4);
    Ok((&p * tensor * p.adjoint()) * C64::new(0.5 * w, 0.0))
}

/// `½ Σ_q V_q Σ_{k₁k₂} a†_{k₁+q}a†_{k₂-q}a_{k₂}a_{k₁}` on a two-particle basis, from
/// plane-wave pair projections.
pub fn v_momentum_matrix(basis: &FockBasis, lattice: &Lattice, potential: &[C64]) -> Result<DMatrix<C64>> {
    if basis.particles() != 2 {
        return Err(Error::ParticleMismatch(2, basis.particles()));
    }
    let n = lattice.size();
    let unit = |k: usize| -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[k] = C64::new(1.0, 0.0);
        v
    };
    let pair = |a: usize, b: usize| basis.project(&[&unit(a), &unit(b)]).map(nalgebra::DVector::from_vec);
    let mut out = DMatrix::<C64>::zeros(basis.dim(), basis.dim());
    for q in 0..n {
        let ql = lattice.momentum_label(q);
        for k1 in 0..n {
            for k2 in 0..n {
                let bra = pair(lattice.shifted_index(k1, ql, 1), lattice.shifted_index(k2, ql, -1))?;
                let ket = pair(k1, k2)?;
                out.gerc(potential[q] * 0.5, &bra, &ket, C64::new(1.0, 0.0));
            }
        }
    }
    Ok(out)
}

/// `Σ_{ℓ'ℓ} M^{-2D} ⟨ℓ'|H₀|ℓ⟩ |ℓ'⟩⟨ℓ|` in the momentum basis; should equal `diag(ε_k)`.
pub fn reassemble_h0(envelope: &Envelope) -> Result<OperatorMatrix> {
    require_normalized(envelope)?;
    let lat = *envelope.lattice();
    check_sum_size(&lat, 1)?;
    let labels = packet_labels(&lat);
    let params: Vec<WavePacketParams<'_>> = labels
        .iter()
        .map(|&(r, k)| WavePacketParams::new(lat.position(r), lat.momentum(k), envelope))
        .collect();
    let states: Vec<Vec<C64>> = labels.iter().map(|&(r, k)| packet(envelope, r, k)).collect::<Result<_>>()?;
    let nl = labels.len();
    let h = DMatrix::from_fn(nl, nl, |a, b| {
        h0_wavepacket_element(envelope, &params[a], &params[b]).expect("labels on grid")
    });
    let psi = DMatrix::from_fn(lat.size(), nl, |k, l| states[l][k]);
    let w = (lat.size() as f64).powi(-2);
    OperatorMatrix::new(Basis::Momentum, (&psi * h * psi.adjoint()) * C64::new(w, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_b() -> (Lattice, Envelope) {
        let lat = Lattice::new(1, 8.0, 6, 1.0).unwrap();
        let env = Envelope::thermal(lat, 1.0).unwrap().normalized();
        (lat, env)
    }

    fn unit(n: usize, k: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[k] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn basis_dimensions() {
        assert_eq!(FockBasis::new(6, 2, Statistics::Boson).unwrap().dim(), 21);
        assert_eq!(FockBasis::new(6, 2, Statistics::Fermion).unwrap().dim(), 15);
        assert_eq!(FockBasis::new(16, 3, Statistics::Boson).unwrap().dim(), 816);
        let b = FockBasis::new(4, 3, Statistics::Boson).unwrap();
        let c = b.position(&[1, 1, 1]).unwrap();
        assert!((b.norm(c) - 6f64.sqrt()).abs() < 1e-15);
        assert!(FockBasis::new(6, 7, Statistics::Fermion).is_err());
        let f = FockBasis::new(6, 2, Statistics::Fermion).unwrap();
        assert!(f.configs().iter().all(|c| c[0] < c[1]));
    }

    #[test]
    fn permanent_matches_expansion() {
        let a = DMatrix::from_fn(5, 5, |i, j| C64::new((i * 5 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let brute = {
            let mut total = C64::new(0.0, 0.0);
            let mut perm: Vec<usize> = (0..5).collect();
            permute(&mut perm, 0, &mut |p| {
                total += (0..5).map(|i| a[(i, p[i])]).product::<C64>();
            });
            total
        };
        assert!((permanent(&a) - brute).norm() < 1e-12 * brute.norm().max(1.0));
        let id = DMatrix::<C64>::identity(4, 4);
        assert!((permanent(&id) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn product_overlap_cases() {
        let a = ProductState::new(vec![unit(6, 1)], Statistics::Boson).unwrap();
        assert_eq!(product_overlap(&a, &a).unwrap(), C64::new(1.0, 0.0));
        let f = ProductState::new(vec![unit(6, 2), unit(6, 2)], Statistics::Fermion).unwrap();
        assert!(product_overlap(&f, &f).unwrap().norm() < 1e-12);
        let b = ProductState::new(vec![unit(6, 0), unit(6, 3)], Statistics::Boson).unwrap();
        assert!((product_overlap(&b, &b).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(product_overlap(&a, &b), Err(Error::ParticleMismatch(1, 2))));
    }

    #[test]
    fn number_operator_is_identity() {
        let (_, env) = fixture_b();
        assert!(number_operator_check(&env).unwrap() < 1e-12);
        let lat = Lattice::new(2, 6.0, 8, 1.0).unwrap();
        let env = Envelope::thermal(lat, 0.5).unwrap().normalized();
        assert!(number_operator_check(&env).unwrap() < 1e-12);
        assert!(number_operator_check(&Envelope::delta(lat)).unwrap() < 1e-12);
        assert!(number_operator_check(&Envelope::thermal(lat, 0.5).unwrap()).is_err());
    }

    #[test]
    fn two_particle_closure() {
        let (_, env) = fixture_b();
        for stats in [Statistics::Boson, Statistics::Fermion] {
            let r = closure_n(&env, 2, stats, 1).unwrap();
            assert!(r.max_error < 1e-10, "{stats}: {r:?}");
        }
    }

    #[test]
    fn two_particle_boltzmann_rt() {
        let (lat, _) = fixture_b();
        for stats in [Statistics::Boson, Statistics::Fermion] {
            let basis = FockBasis::new(6, 2, stats).unwrap();
            let eig = boltzmann_n(&basis, &lat, 1.0, Representation::Eigen, 1).unwrap().value;
            let rt = boltzmann_n(&basis, &lat, 1.0, Representation::PositionPackets, 1).unwrap().value;
            assert!(max_abs(&(&rt - &eig)) < 1e-10);
            assert!(max_abs(&(&rt - rt.adjoint())) < 1e-12);
        }
        let basis = FockBasis::new(6, 2, Statistics::Boson).unwrap();
        let eig = boltzmann_n(&basis, &lat, 1.0, Representation::Eigen, 1).unwrap().value;
        let z = lat.zero_momentum_index();
        assert_eq!(eig[(basis.position(&[z, z]).unwrap(), basis.position(&[z, z]).unwrap())], C64::new(1.0, 0.0));
    }

    #[test]
    fn h0_matches_brute_force() {
        let (lat, env) = fixture_b();
        let a = WavePacketParams::new(lat.position(1), lat.momentum(4), &env);
        let b = WavePacketParams::new(lat.position(4), lat.momentum(1), &env);
        let sa = make_state(&a).unwrap();
        let sb = make_state(&b).unwrap();
        let brute: C64 = (0..lat.size())
            .map(|k| lat.dispersion(k) * sa.amplitudes()[k].conj() * sb.amplitudes()[k])
            .sum();
        assert!((h0_wavepacket_element(&env, &a, &b).unwrap() - brute).norm() < 1e-12);
    }

    #[test]
    fn h0_reassembles_to_dispersion() {
        let (lat, env) = fixture_b();
        for e in [env, Envelope::delta(lat)] {
            let h = reassemble_h0(&e).unwrap();
            let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                6,
                (0..6).map(|k| C64::new(lat.dispersion(k), 0.0)),
            ));
            assert!(max_abs(&(h.matrix() - expect)) < 1e-12);
        }
    }

    #[test]
    fn u_q_special_cases() {
        let (lat, env) = fixture_b();
        let a = WavePacketParams::new(lat.position(2), lat.momentum(3), &env);
        let b = WavePacketParams::new(lat.position(5), lat.momentum(1), &env);
        let u0 = u_q_amplitude(&env, [0.0; 3], &a, &b).unwrap();
        assert!((u0 - crate::wavepacket::overlap(&a, &b).unwrap()).norm() < 1e-14);

        let delta = Envelope::delta(lat);
        let q = lat.momentum(4);
        let kp = lat.label_to_momentum([lat.momentum_label(1)[0] + lat.momentum_label(4)[0], 0, 0]);
        let bra = WavePacketParams::new(lat.position(2), kp, &delta);
        let ket = WavePacketParams::new(lat.position(5), lat.momentum(1), &delta);
        let expect = C64::from_polar(1.0, kp[0] * lat.position(2)[0] - lat.momentum(1)[0] * lat.position(5)[0]);
        assert!((u_q_amplitude(&delta, q, &bra, &ket).unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn v_reassembly_matches_direct() {
        let (lat, env) = fixture_b();
        let g = 0.7;
        let potential = vec![C64::new(g / 8.0, 0.0); 6];
        let tensor = v_wavepacket_tensor(&env, &potential).unwrap();
        for stats in [Statistics::Boson, Statistics::Fermion] {
            let basis = FockBasis::new(6, 2, stats).unwrap();
            let direct = v_momentum_matrix(&basis, &lat, &potential).unwrap();
            let re = reassemble_v(&basis, &env, &tensor).unwrap();
            assert!(max_abs(&(&re - &direct)) < 1e-10, "{stats}");
        }
    }
}
