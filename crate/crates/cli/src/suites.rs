//! Verification suites. Each suite turns one family of identities into [`Check`]s
//! with a measured error, a tolerance and the regime flags of its parameters.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twp_core::envelope::Envelope;
use twp_core::greens::{compare_spectra, greens_eigen, greens_wavepacket, sum_rule};
use twp_core::lattice::{Basis, Lattice};
use twp_core::manybody::{
    boltzmann_n, closure_n, number_operator_check, product_overlap, reassemble_v, v_momentum_matrix, v_wavepacket_tensor,
    h0_wavepacket_element, FockBasis, ProductState, Representation, Statistics,
};
use twp_core::operator::{max_abs, OperatorMatrix};
use twp_core::regime::RegimeFlags;
use twp_core::thermal::{
    boltzmann_matrix, kernel_profile, kernel_split, partition_function, reconstruct_from_rkt, reconstruct_from_rt,
    reconstruction_error, split_aliasing_estimate, split_window_error, thermal_params, TemperatureSplit,
};
use twp_core::wavepacket::{
    drift_tolerance, energy_mean, energy_variance, evolve, fidelity, make_state, match_frequency, momentum_mean,
    position_mean, uncertainty, WavePacketParams, WavePacketState,
};

use crate::config::{RunConfig, Suite};
use crate::report::{Check, Report};

type CoreResult<T> = twp_core::Result<T>;

/// Runs `suites` and assembles the report. With `parallel`, suites run on scoped
/// threads; the report is identical either way.
pub fn run(cfg: &RunConfig, suites: &[Suite], parallel: bool) -> Report {
    let mut selected = suites.to_vec();
    selected.sort();
    selected.dedup();
    let checks: Vec<Check> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = selected.iter().map(|&suite| s.spawn(move || run_suite(cfg, suite))).collect();
            handles.into_iter().flat_map(|h| h.join().expect("suite thread panicked")).collect()
        })
    } else {
        selected.iter().flat_map(|&suite| run_suite(cfg, suite)).collect()
    };
    Report::new(cfg.seed, cfg.resolved(), checks)
}

pub fn run_suite(cfg: &RunConfig, suite: Suite) -> Vec<Check> {
    let mut out = Vec::new();
    let res = match suite {
        Suite::Closure => closure(cfg, &mut out),
        Suite::Boltzmann => boltzmann_rt(cfg, &mut out),
        Suite::BoltzmannRkt => boltzmann_rkt(cfg, &mut out),
        Suite::Split => split(cfg, &mut out),
        Suite::Kernel => kernel(cfg, &mut out),
        Suite::Observables => observables(cfg, &mut out),
        Suite::Uncertainty => uncertainty_suite(cfg, &mut out),
        Suite::Evolution => evolution(cfg, &mut out),
        Suite::Coherent => coherent(cfg, &mut out),
        Suite::Manybody => manybody(cfg, &mut out),
        Suite::Greens => greens(cfg, &mut out),
    };
    if let Err(e) = res {
        out.push(Check::error(suite.name(), "error", 0.0, e));
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// `T/4, T, 4T`.
fn temperature_ladder(t: f64) -> [f64; 3] {
    [t / 4.0, t, 4.0 * t]
}

fn packet(lat: Lattice, beta: f64, center: [f64; 3], momentum: [f64; 3]) -> CoreResult<WavePacketState> {
    let env = Envelope::thermal_packet(lat, beta)?;
    make_state(&WavePacketParams::new(center, momentum, &env))
}

/// Uniform entries in `[-1, 1]` symmetrized into a Hermitian matrix.
pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)));
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn closure(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Closure;
    let lat = cfg.lattice;
    let beta = 1.0 / cfg.temperature;
    let env = Envelope::thermal(lat, beta)?.normalized();
    out.push(Check::new(
        s.name(),
        "one_particle",
        number_operator_check(&env)?,
        cfg.tolerance(s, "one_particle", 1e-12),
        RegimeFlags::CLEAN,
    ));
    out.push(Check::new(
        s.name(),
        "one_particle_delta",
        number_operator_check(&Envelope::delta(lat))?,
        cfg.tolerance(s, "one_particle_delta", 1e-12),
        RegimeFlags::CLEAN,
    ));
    Ok(())
}

fn boltzmann_rt(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Boltzmann;
    let lat = cfg.lattice;
    for t in temperature_ladder(cfg.temperature) {
        let beta = 1.0 / t;
        let flags = RegimeFlags::for_beta(&lat, beta);
        let recon = reconstruct_from_rt(&lat, beta)?;
        let exact = boltzmann_matrix(&lat, beta, Basis::Momentum)?;
        out.push(Check::new(
            s.name(),
            format!("reconstruction[T={t}]"),
            recon.max_abs_diff(&exact)?,
            cfg.tolerance(s, "reconstruction", 1e-12),
            flags,
        ));
        let z = partition_function(&lat, beta);
        out.push(Check::new(
            s.name(),
            format!("trace[T={t}]"),
            (recon.trace() - z).norm() / z,
            cfg.tolerance(s, "trace", 1e-12),
            flags,
        ));
    }
    // e^{-βH₀} e^{-βH₀} = e^{-2βH₀} between two reconstructions
    let beta = 1.0 / cfg.temperature;
    let one = reconstruct_from_rt(&lat, beta)?;
    let two = reconstruct_from_rt(&lat, 2.0 * beta)?;
    out.push(Check::new(
        s.name(),
        "semigroup",
        max_abs(&(one.matrix() * one.matrix() - two.matrix())),
        cfg.tolerance(s, "semigroup", 1e-12),
        RegimeFlags::for_betas(&lat, &[beta, 2.0 * beta]),
    ));
    Ok(())
}

fn boltzmann_rkt(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::BoltzmannRkt;
    let lat = cfg.lattice;
    for &x in &cfg.split {
        let split = TemperatureSplit::new(cfg.temperature, x)?;
        let recon = reconstruct_from_rkt(&lat, &split)?;
        let err = reconstruction_error(&lat, split.beta(), &recon.value)?;
        let estimate = format!("image estimate {:.3e}", split_aliasing_estimate(&lat, &split));
        out.push(
            Check::new(
                s.name(),
                format!("diagonal[x={x}]"),
                err.diagonal_rel,
                cfg.tolerance(s, "diagonal", 1e-6),
                recon.flags,
            )
            .with_detail(estimate),
        );
        out.push(Check::new(
            s.name(),
            format!("off_diagonal[x={x}]"),
            err.off_diagonal_abs,
            cfg.tolerance(s, "off_diagonal", 1e-12),
            recon.flags,
        ));
    }
    Ok(())
}

fn split(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Split;
    let lat = cfg.lattice;
    for &x in &cfg.split {
        let split = TemperatureSplit::new(cfg.temperature, x)?;
        let err = split_window_error(&lat, &split)?;
        out.push(
            Check::new(s.name(), format!("window[x={x}]"), err.value, cfg.tolerance(s, "window", 1e-6), err.flags)
                .with_detail(format!("image estimate {:.3e}", split_aliasing_estimate(&lat, &split))),
        );
    }
    Ok(())
}

fn kernel(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Kernel;
    let lat = cfg.lattice;
    let params = thermal_params(&lat, cfg.temperature)?;
    let quarter = lat.length() / 4.0;
    let worst = kernel_profile(&params)
        .iter()
        .filter(|p| p.separation <= quarter + 1e-12)
        .map(|p| p.rel_error)
        .fold(0.0, f64::max);
    out.push(
        Check::new(s.name(), "gaussian", worst, cfg.tolerance(s, "gaussian", 1e-6), params.flags)
            .with_detail(format!("|separation| <= {quarter}")),
    );
    for &x in &cfg.split {
        let split = TemperatureSplit::new(cfg.temperature, x)?;
        for (base, d) in [("split_origin", 0.0), ("split_unit", 1.0)] {
            let ks = kernel_split(&lat, &split, [d, 0.0, 0.0], [0.0; 3])?;
            out.push(Check::new(
                s.name(),
                format!("{base}[x={x}]"),
                ks.value.rel_error,
                cfg.tolerance(s, base, 1e-6),
                ks.flags,
            ));
        }
    }
    Ok(())
}

fn observables(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Observables;
    let lat = cfg.lattice;
    let t = cfg.temperature;
    let beta = 1.0 / t;
    let flags = RegimeFlags::for_beta(&lat, beta);
    let k = cfg.momentum();
    let rt = packet(lat, beta, cfg.center, [0.0; 3])?;
    let rkt = packet(lat, beta, cfg.center, k)?;
    let dim = lat.dim() as f64;

    // lattice-sum oracles
    let w: Vec<f64> = (0..lat.size()).map(|i| (-beta * lat.dispersion(i)).exp()).collect();
    let z: f64 = w.iter().sum();
    let m1: f64 = (0..lat.size()).map(|i| w[i] * lat.dispersion(i)).sum::<f64>() / z;
    let m2: f64 = (0..lat.size()).map(|i| w[i] * lat.dispersion(i).powi(2)).sum::<f64>() / z;

    // |⟨k|R,K,T⟩|² = e^{-βε_{k-K}} L^{-2D}
    out.push(Check::new(
        s.name(),
        "norm",
        rel(rkt.norm_sqr(), z / lat.volume().powi(2)),
        cfg.tolerance(s, "norm", 1e-12),
        flags,
    ));
    let mk = momentum_mean(&rkt);
    let dk = (0..lat.dim()).map(|a| (mk[a] - k[a]).abs()).fold(0.0, f64::max);
    out.push(Check::new(s.name(), "momentum_mean", dk, cfg.tolerance(s, "momentum_mean", 1e-12), flags));
    let mr = position_mean(&rkt)?;
    let dr = (0..lat.dim()).map(|a| lat.min_image(mr[a] - cfg.center[a]).abs()).fold(0.0, f64::max);
    out.push(Check::new(s.name(), "position_mean", dr, cfg.tolerance(s, "position_mean", 1e-6), flags));

    let e = energy_mean(&rt);
    let v = energy_variance(&rt);
    let eflags = flags.merge(e.flags).merge(v.flags);
    out.push(Check::new(s.name(), "energy_mean_lattice", rel(e.value, m1), cfg.tolerance(s, "energy_mean_lattice", 1e-6), eflags));
    out.push(Check::new(
        s.name(),
        "energy_mean_continuum",
        rel(e.value, dim / 2.0 * t),
        cfg.tolerance(s, "energy_mean_continuum", 1e-5),
        eflags,
    ));
    out.push(Check::new(
        s.name(),
        "energy_variance_lattice",
        rel(v.value, m2 - m1 * m1),
        cfg.tolerance(s, "energy_variance_lattice", 1e-6),
        eflags,
    ));
    out.push(Check::new(
        s.name(),
        "energy_variance_continuum",
        rel(v.value, dim / 2.0 * t * t),
        cfg.tolerance(s, "energy_variance_continuum", 1e-5),
        eflags,
    ));
    let eps_k = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) / (2.0 * lat.mass());
    let ek = energy_mean(&rkt);
    out.push(Check::new(
        s.name(),
        "energy_mean_moving",
        rel(ek.value, dim / 2.0 * t + eps_k),
        cfg.tolerance(s, "energy_mean_moving", 1e-6),
        flags.merge(ek.flags),
    ));

    // hotter envelopes are narrower: count ladder steps where the variance fails to drop
    let mut temps = cfg.temperatures.clone();
    temps.sort_by(f64::total_cmp);
    let mut vars = Vec::with_capacity(temps.len());
    for &tt in &temps {
        vars.push(Envelope::thermal(lat, 1.0 / tt)?.position_variance());
    }
    let violations = vars.windows(2).filter(|w| !(w[1] < w[0])).count();
    let lflags = RegimeFlags::for_betas(&lat, &temps.iter().map(|t| 1.0 / t).collect::<Vec<_>>());
    out.push(
        Check::new(s.name(), "localization", violations as f64, cfg.tolerance(s, "localization", 0.0), lflags).with_detail(
            temps
                .iter()
                .zip(&vars)
                .map(|(t, v)| format!("T={t}: var={v:.6e}"))
                .collect::<Vec<_>>()
                .join("; "),
        ),
    );
    Ok(())
}

fn uncertainty_suite(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Uncertainty;
    let lat = cfg.lattice;
    let dim = lat.dim();
    for t in temperature_ladder(cfg.temperature) {
        let u = uncertainty(&packet(lat, 1.0 / t, cfg.center, cfg.momentum())?)?;
        let dev = (0..dim).map(|a| (u.product[a] - 0.5).abs()).fold(0.0, f64::max);
        out.push(Check::new(
            s.name(),
            format!("product[T={t}]"),
            dev,
            cfg.tolerance(s, "product", 1e-4),
            RegimeFlags::for_beta(&lat, 1.0 / t),
        ));
    }
    // separate widths at the configured temperature: Δk² = m T, Δx² = λ²/8
    let t = cfg.temperature;
    let beta = 1.0 / t;
    let u = uncertainty(&packet(lat, beta, cfg.center, cfg.momentum())?)?;
    let lambda2 = 2.0 * beta / lat.mass();
    let flags = RegimeFlags::for_beta(&lat, beta);
    let dk = (0..dim).map(|a| rel(u.delta_k[a].powi(2), 2.0 / lambda2)).fold(0.0, f64::max);
    let dx = (0..dim).map(|a| rel(u.delta_x[a].powi(2), lambda2 / 8.0)).fold(0.0, f64::max);
    out.push(Check::new(s.name(), "delta_k", dk, cfg.tolerance(s, "delta_k", 1e-4), flags));
    out.push(Check::new(s.name(), "delta_x", dx, cfg.tolerance(s, "delta_x", 1e-4), flags));
    Ok(())
}

fn evolution(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Evolution;
    let lat = cfg.lattice;
    let beta = 1.0 / cfg.temperature;
    let flags = RegimeFlags::for_beta(&lat, beta);
    let k = cfg.momentum();
    let m = lat.mass();
    let s0 = packet(lat, beta, cfg.center, k)?;
    let n0 = s0.norm_sqr();
    let k0 = momentum_mean(&s0);
    let steps = 20;
    let (mut norm_drift, mut mom_drift, mut fid_rise) = (0.0f64, 0.0f64, 0.0f64);
    let mut last_fid = f64::NAN;
    let env = Envelope::thermal_packet(lat, beta)?;
    for i in 0..=steps {
        let t = cfg.evolve_time * i as f64 / steps as f64;
        let st = evolve(&s0, t);
        norm_drift = norm_drift.max(rel(st.norm_sqr(), n0));
        let kt = momentum_mean(&st);
        mom_drift = (0..lat.dim()).map(|a| (kt[a] - k0[a]).abs()).fold(mom_drift, f64::max);

        let classical: [f64; 3] = std::array::from_fn(|a| cfg.center[a] + k[a] * t / m);
        let moved = make_state(&WavePacketParams::new(classical, k, &env))?;
        let fid = fidelity(&moved, &st)?;
        if i > 0 {
            fid_rise = fid_rise.max(fid - last_fid);
        }
        last_fid = fid;

        if i % 5 == 0 {
            let mean = position_mean(&st)?;
            let dev = (0..lat.dim()).map(|a| lat.min_image(mean[a] - classical[a]).abs()).fold(0.0, f64::max);
            let tol = cfg
                .tolerances
                .get("evolution.position_track")
                .copied()
                .unwrap_or_else(|| drift_tolerance(&lat, beta, t));
            out.push(Check::new(s.name(), format!("position_track[t={t}]"), dev, tol, flags));
        }
    }
    out.push(Check::new(s.name(), "norm_drift", norm_drift, cfg.tolerance(s, "norm_drift", 1e-12), flags));
    out.push(Check::new(s.name(), "momentum_drift", mom_drift, cfg.tolerance(s, "momentum_drift", 1e-12), flags));
    out.push(Check::new(
        s.name(),
        "fidelity_monotone",
        fid_rise.max(0.0),
        cfg.tolerance(s, "fidelity_monotone", 1e-12),
        flags,
    ));
    Ok(())
}

fn coherent(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Coherent;
    let lat = cfg.lattice;
    let t = cfg.temperature;
    let flags = RegimeFlags::for_beta(&lat, 1.0 / t);
    let fm = match_frequency(&lat, cfg.center, cfg.momentum(), t)?;
    out.push(
        Check::new(
            s.name(),
            "width_matched_frequency",
            rel(fm.omega_star, fm.omega_width_matched),
            cfg.tolerance(s, "width_matched_frequency", 1e-4),
            flags,
        )
        .with_detail(format!(
            "omega_star={:.9}, omega_width_matched={:.9}, omega_quoted={:.9}",
            fm.omega_star, fm.omega_width_matched, fm.omega_quoted
        )),
    );
    out.push(Check::new(s.name(), "distance", fm.distance, cfg.tolerance(s, "distance", 1e-6), flags));

    // T → 0: the packet collapses onto the plane wave |K⟩
    let cold_beta = 64.0 / t;
    let cold = packet(lat, cold_beta, cfg.center, cfg.momentum())?;
    let ik = lat.momentum_index(cfg.momentum_label);
    let weight = cold.amplitudes()[ik].norm_sqr() / cold.norm_sqr();
    out.push(Check::new(
        s.name(),
        "cold_fidelity",
        1.0 - weight,
        cfg.tolerance(s, "cold_fidelity", 1e-2),
        RegimeFlags::for_beta(&lat, cold_beta),
    ));
    // T → ∞: the envelope collapses onto a few lattice sites
    let hot_beta = 1.0 / (64.0 * t);
    let hot = Envelope::thermal(lat, hot_beta)?;
    let h2 = lat.spacing().powi(2);
    out.push(Check::new(
        s.name(),
        "hot_localization",
        hot.position_variance(),
        cfg.tolerance(s, "hot_localization", 4.0 * h2),
        RegimeFlags::for_beta(&lat, hot_beta),
    ));
    Ok(())
}

/// `Σ_k a*_k ε_k b_k` from explicitly constructed packet states.
pub fn h0_brute_force(lat: &Lattice, a: &WavePacketState, b: &WavePacketState) -> C64 {
    (0..lat.size())
        .map(|i| a.amplitudes()[i].conj() * lat.dispersion(i) * b.amplitudes()[i])
        .sum()
}

fn manybody(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Manybody;
    let mb = cfg.mb_lattice();
    let beta = 1.0 / cfg.temperature;
    let mb_flags = RegimeFlags::for_beta(&mb, beta);
    let env = Envelope::thermal(mb, beta)?.normalized();
    let potential = vec![C64::new(cfg.coupling / mb.length(), 0.0); mb.size()];
    let tensor = v_wavepacket_tensor(&env, &potential)?;

    for &stats in &cfg.statistics {
        let n = cfg.particles;
        let cl = closure_n(&env, n, stats, 1)?;
        out.push(Check::new(
            s.name(),
            format!("closure[{stats},N={n}]"),
            cl.max_error,
            cfg.tolerance(s, "closure", 1e-10),
            RegimeFlags::CLEAN,
        ));
        let basis = FockBasis::new(mb.size(), n, stats)?;
        let rt = boltzmann_n(&basis, &mb, beta, Representation::PositionPackets, 1)?;
        let exact = boltzmann_n(&basis, &mb, beta, Representation::Eigen, 1)?;
        out.push(Check::new(
            s.name(),
            format!("boltzmann_rt[{stats},N={n}]"),
            max_abs(&(&rt.value - &exact.value)),
            cfg.tolerance(s, "boltzmann_rt", 1e-10),
            rt.flags,
        ));
        out.push(Check::new(
            s.name(),
            format!("hermiticity[{stats},N={n}]"),
            max_abs(&(&rt.value - rt.value.adjoint())),
            cfg.tolerance(s, "hermiticity", 1e-12),
            rt.flags,
        ));

        let pair = FockBasis::new(mb.size(), 2, stats)?;
        let packets = reassemble_v(&pair, &env, &tensor)?;
        let direct = v_momentum_matrix(&pair, &mb, &potential)?;
        out.push(Check::new(
            s.name(),
            format!("v_reassembly[{stats}]"),
            max_abs(&(packets - direct)),
            cfg.tolerance(s, "v_reassembly", 1e-10),
            mb_flags,
        ));
    }

    // two fermions in the same packet
    let state = make_state(&WavePacketParams::new(mb.position(0), mb.momentum(mb.zero_momentum_index()), &env))?;
    let v = state.amplitudes().to_vec();
    let p = ProductState::new(vec![v.clone(), v], Statistics::Fermion)?;
    out.push(Check::new(
        s.name(),
        "pauli",
        product_overlap(&p, &p)?.norm(),
        cfg.tolerance(s, "pauli", 1e-12),
        RegimeFlags::CLEAN,
    ));

    // H₀ elements on the main lattice against explicit states
    let lat = cfg.lattice;
    let henv = Envelope::thermal(lat, beta)?.normalized();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.h0_pairs {
        let mut pick = || WavePacketParams::new(lat.position(rng.gen_range(0..lat.size())), lat.momentum(rng.gen_range(0..lat.size())), &henv);
        let (a, b) = (pick(), pick());
        let fast = h0_wavepacket_element(&henv, &a, &b)?;
        let slow = h0_brute_force(&lat, &make_state(&a)?, &make_state(&b)?);
        worst = worst.max((fast - slow).norm());
    }
    out.push(
        Check::new(s.name(), "h0_elements", worst, cfg.tolerance(s, "h0_elements", 1e-12), RegimeFlags::CLEAN)
            .with_detail(format!("{} random label pairs", cfg.h0_pairs)),
    );
    Ok(())
}

fn greens(cfg: &RunConfig, out: &mut Vec<Check>) -> CoreResult<()> {
    let s = Suite::Greens;
    let lat = cfg.lattice;
    let beta = 1.0 / cfg.temperature;
    let n = lat.size();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ops: Vec<OperatorMatrix> = (0..cfg.random_operators)
        .map(|_| OperatorMatrix::new(Basis::Momentum, random_hermitian(n, &mut rng)))
        .collect::<CoreResult<_>>()?;
    let eigen = ops
        .iter()
        .map(|a| greens_eigen(&lat, beta, a, a))
        .collect::<CoreResult<Vec<_>>>()?;

    let mut sum_err: f64 = 0.0;
    for (a, g) in ops.iter().zip(&eigen) {
        let exact = sum_rule(&lat, beta, a, a)?;
        sum_err = sum_err.max((g.value.total_weight() - exact).norm() / exact.norm());
    }
    out.push(Check::new(
        s.name(),
        "sum_rule",
        sum_err,
        cfg.tolerance(s, "sum_rule", 1e-10),
        RegimeFlags::for_beta(&lat, beta),
    ));

    let tol = cfg.tolerance(s, "weights", 1e-6);
    for &x in &cfg.split {
        let split = TemperatureSplit::new(cfg.temperature, x)?;
        let (mut worst, mut unmatched) = (0.0f64, 0usize);
        let mut flags = RegimeFlags::CLEAN;
        for (a, g) in ops.iter().zip(&eigen) {
            let wp = greens_wavepacket(&lat, &split, a, a)?;
            let cmp = compare_spectra(&g.value, &wp.value, tol);
            worst = worst.max(cmp.max_rel_error);
            unmatched += cmp.unmatched_a.len() + cmp.unmatched_b.len();
            flags = flags.merge(g.flags).merge(wp.flags);
        }
        out.push(
            Check::new(s.name(), format!("weights[x={x}]"), worst, tol, flags)
                .with_detail(format!("{} random Hermitian A = B", ops.len())),
        );
        out.push(Check::new(
            s.name(),
            format!("unmatched[x={x}]"),
            unmatched as f64,
            cfg.tolerance(s, "unmatched", 0.0),
            flags,
        ));
    }

    // A = B = |0⟩⟨0| has a single line at ω = 0 with weight 2π/Z
    let mut proj = DMatrix::<C64>::zeros(n, n);
    let k0 = lat.zero_momentum_index();
    proj[(k0, k0)] = C64::new(1.0, 0.0);
    let proj = OperatorMatrix::new(Basis::Momentum, proj)?;
    let g = greens_eigen(&lat, beta, &proj, &proj)?;
    let expect = 2.0 * std::f64::consts::PI / partition_function(&lat, beta);
    let nonzero: Vec<_> = g.value.lines().iter().filter(|l| l.weight.norm() > 0.0).collect();
    let err = match nonzero.as_slice() {
        [line] => line.omega.abs().max((line.weight - expect).norm() / expect),
        _ => f64::INFINITY,
    };
    out.push(Check::new(s.name(), "projector", err, cfg.tolerance(s, "projector", 1e-12), g.flags));
    Ok(())
}
