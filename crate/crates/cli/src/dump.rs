//! CSV data dumps: packet profiles, the thermal kernel, spectral lines and sweeps.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use twp_core::envelope::Envelope;
use twp_core::greens::{greens_eigen, greens_wavepacket, SpectralLines};
use twp_core::lattice::{Basis, Lattice};
use twp_core::operator::OperatorMatrix;
use twp_core::regime::RegimeFlags;
use twp_core::thermal::{
    boltzmann_matrix, kernel_profile, reconstruct_from_rkt, reconstruct_from_rt, reconstruction_error, split_window_error,
    thermal_params, TemperatureSplit, MAX_RECONSTRUCTION_SIZE, MAX_SPLIT, MIN_SPLIT,
};
use twp_core::wavepacket::{axis_profile, make_state, uncertainty, WavePacketParams};

use crate::config::{RunConfig, SweepParameter};
use crate::suites::random_hermitian;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileSummary {
    pub temperature: f64,
    pub file: String,
    /// Spatial variance of `|R,T⟩` about `R` along axis 0.
    pub variance: f64,
    /// Sign changes of `Re ψ` for `|R,K,T⟩` where `|ψ|` exceeds 1e-3 of its peak.
    pub sign_changes: usize,
    /// `|R,K,T⟩` modulus rises to a single peak and falls off.
    pub unimodal_modulus: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WavefunctionSummary {
    pub profiles: Vec<ProfileSummary>,
    pub localization_monotone: bool,
    pub oscillatory: bool,
}

impl WavefunctionSummary {
    pub fn passed(&self) -> bool {
        self.localization_monotone && self.oscillatory
    }
}

fn spatial_variance(lat: &Lattice, center: f64, profile: &[(f64, num_complex::Complex64)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (r, psi) in profile {
        let d = lat.min_image(r - center);
        num += psi.norm_sqr() * d * d;
        den += psi.norm_sqr();
    }
    num / den
}

fn unimodal(values: &[f64]) -> bool {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    let start = values.iter().position(|&v| v == peak).unwrap_or(0);
    // walk the periodic profile outward from the peak in both directions
    let n = values.len();
    let tiny = 1e-12 * peak;
    let falls = |step: usize| {
        (0..n / 2).all(|i| {
            let a = values[(start + i * step) % n];
            let b = values[(start + (i + 1) * step) % n];
            b <= a + tiny
        })
    };
    falls(1) && falls(n - 1)
}

/// One CSV per temperature holding `|R,T⟩` and `|R,K,T⟩` along axis 0, columns
/// `state, r, re, im, abs`. Temperatures are processed in ascending order.
pub fn wavefunction(cfg: &RunConfig, dir: &Path) -> Result<WavefunctionSummary> {
    let lat = cfg.lattice;
    let mut temps = cfg.temperatures.clone();
    temps.sort_by(f64::total_cmp);
    let mut profiles = Vec::new();
    for &t in &temps {
        let env = Envelope::thermal_packet(lat, 1.0 / t)?;
        let rt = make_state(&WavePacketParams::new(cfg.center, [0.0; 3], &env))?;
        let rkt = make_state(&WavePacketParams::new(cfg.center, cfg.momentum(), &env))?;
        let name = format!("wavefunction_T{t}.csv");
        let mut w = writer(&dir.join(&name))?;
        w.write_record(["state", "r", "re", "im", "abs"])?;
        let p_rt = axis_profile(&rt);
        let p_rkt = axis_profile(&rkt);
        for (label, prof) in [("RT", &p_rt), ("RKT", &p_rkt)] {
            for (r, psi) in prof.iter() {
                w.serialize((label, r, psi.re, psi.im, psi.norm()))?;
            }
        }
        w.flush()?;

        let modulus: Vec<f64> = p_rkt.iter().map(|(_, p)| p.norm()).collect();
        let peak = modulus.iter().cloned().fold(0.0, f64::max);
        let support: Vec<f64> = p_rkt
            .iter()
            .filter(|(_, p)| p.norm() > 1e-3 * peak)
            .map(|(_, p)| p.re)
            .collect();
        let sign_changes = support.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        profiles.push(ProfileSummary {
            temperature: t,
            file: name,
            variance: spatial_variance(&lat, cfg.center[0], &p_rt),
            sign_changes,
            unimodal_modulus: unimodal(&modulus),
        });
    }
    let localization_monotone = profiles.windows(2).all(|w| w[1].variance < w[0].variance);
    let oscillatory = cfg.momentum_label[0] == 0
        || profiles.iter().all(|p| p.sign_changes >= 2 && p.unimodal_modulus);
    let summary = WavefunctionSummary { profiles, localization_monotone, oscillatory };
    std::fs::write(dir.join("wavefunction.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

/// Columns `separation, exact, gaussian, rel_error`.
pub fn kernel(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    let params = thermal_params(&cfg.lattice, cfg.temperature)?;
    let path = dir.join("kernel.csv");
    let mut w = writer(&path)?;
    w.write_record(["separation", "exact", "gaussian", "rel_error"])?;
    for s in kernel_profile(&params) {
        w.serialize((s.separation, s.exact, s.gaussian, s.rel_error))?;
    }
    w.flush()?;
    Ok(path)
}

/// Lines of `G>_{AA}` for one seeded random Hermitian `A`, from the eigenbasis and
/// from each configured split. Columns `omega, weight_re, weight_im, representation`.
pub fn spectrum(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    let lat = cfg.lattice;
    let beta = 1.0 / cfg.temperature;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = OperatorMatrix::new(Basis::Momentum, random_hermitian(lat.size(), &mut rng))?;
    let mut sets: Vec<(String, SpectralLines)> = vec![("eigen".into(), greens_eigen(&lat, beta, &a, &a)?.value)];
    for &x in &cfg.split {
        let split = TemperatureSplit::new(cfg.temperature, x)?;
        sets.push((format!("wavepacket x={x}"), greens_wavepacket(&lat, &split, &a, &a)?.value));
    }
    let path = dir.join("spectrum.csv");
    let mut w = writer(&path)?;
    w.write_record(["omega", "weight_re", "weight_im", "representation"])?;
    for (rep, lines) in &sets {
        for l in lines.lines().iter().filter(|l| l.weight.norm() > 0.0) {
            w.serialize((l.omega, l.weight.re, l.weight.im, rep))?;
        }
    }
    w.flush()?;
    Ok(path)
}

/// A sweep point outside the module guards.
#[derive(Debug, thiserror::Error)]
#[error("sweep value {value} for {parameter}: {msg}")]
pub struct SweepRangeError {
    pub parameter: &'static str,
    pub value: f64,
    pub msg: String,
}

#[derive(Clone, Debug)]
struct SweepPoint {
    lattice: Lattice,
    temperature: f64,
    fraction: f64,
}

fn sweep_points(cfg: &RunConfig) -> Result<(&'static str, Vec<(f64, SweepPoint)>), SweepRangeError> {
    let (param, values) = cfg.sweep.as_ref().ok_or(SweepRangeError {
        parameter: "sweep",
        value: f64::NAN,
        msg: "sweep_parameter and sweep_values are not configured".into(),
    })?;
    let base = SweepPoint { lattice: cfg.lattice, temperature: cfg.temperature, fraction: cfg.split[0] };
    let name = match param {
        SweepParameter::Temperature => "T",
        SweepParameter::Split => "x",
        SweepParameter::Points => "M",
    };
    let err = |value: f64, msg: String| SweepRangeError { parameter: name, value, msg };
    let mut out = Vec::new();
    for &v in values {
        let mut p = base.clone();
        match param {
            SweepParameter::Temperature => {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(err(v, "temperature must be positive".into()));
                }
                p.temperature = v;
            }
            SweepParameter::Split => {
                if !(MIN_SPLIT..=MAX_SPLIT).contains(&v) {
                    return Err(err(v, format!("outside [{MIN_SPLIT}, {MAX_SPLIT}]")));
                }
                p.fraction = v;
            }
            SweepParameter::Points => {
                if v.fract() != 0.0 || v < 2.0 {
                    return Err(err(v, "not an even grid size".into()));
                }
                let l = &cfg.lattice;
                p.lattice = Lattice::new(l.dim(), l.length(), v as usize, l.mass()).map_err(|e| err(v, e.to_string()))?;
            }
        }
        if p.lattice.size() > MAX_RECONSTRUCTION_SIZE {
            return Err(err(v, format!("{} modes exceed the reconstruction limit {MAX_RECONSTRUCTION_SIZE}", p.lattice.size())));
        }
        out.push((v, p));
    }
    Ok((name, out))
}

/// Validates the sweep before any computation.
pub fn check_sweep(cfg: &RunConfig) -> Result<(), SweepRangeError> {
    sweep_points(cfg).map(|_| ())
}

fn cell(v: Result<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Per-point identity errors. Columns `parameter, value, temperature, fraction, points,
/// split_error, rkt_diagonal_error, rkt_off_diagonal, rt_error, uncertainty_deviation, flags`.
pub fn sweep(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    let (name, points) = sweep_points(cfg)?;
    let path = dir.join(format!("sweep_{name}.csv"));
    let mut w = writer(&path)?;
    w.write_record([
        "parameter",
        "value",
        "temperature",
        "fraction",
        "points",
        "split_error",
        "rkt_diagonal_error",
        "rkt_off_diagonal",
        "rt_error",
        "uncertainty_deviation",
        "flags",
    ])?;
    for (v, p) in points {
        let lat = p.lattice;
        let beta = 1.0 / p.temperature;
        let split = TemperatureSplit::new(p.temperature, p.fraction)?;
        let flags = split.flags(&lat).merge(RegimeFlags::for_beta(&lat, beta));
        let split_err = split_window_error(&lat, &split).map(|f| f.value).map_err(Into::into);
        let rkt = reconstruct_from_rkt(&lat, &split)
            .and_then(|r| reconstruction_error(&lat, beta, &r.value))
            .map_err(anyhow::Error::from);
        let rt = reconstruct_from_rt(&lat, beta)
            .and_then(|r| r.max_abs_diff(&boltzmann_matrix(&lat, beta, Basis::Momentum)?))
            .map_err(Into::into);
        let unc = (|| -> Result<f64> {
            let env = Envelope::thermal_packet(lat, beta)?;
            let center: [f64; 3] = std::array::from_fn(|a| if a < lat.dim() { lat.length() / 2.0 } else { 0.0 });
            let u = uncertainty(&make_state(&WavePacketParams::new(center, [0.0; 3], &env))?)?;
            Ok((0..lat.dim()).map(|a| (u.product[a] - 0.5).abs()).fold(0.0, f64::max))
        })();
        let (rkt_diag, rkt_off) = match rkt {
            Ok(e) => (Ok(e.diagonal_rel), Ok(e.off_diagonal_abs)),
            Err(e) => (Err(anyhow::anyhow!("{e}")), Err(e)),
        };
        w.write_record([
            name.to_string(),
            v.to_string(),
            p.temperature.to_string(),
            p.fraction.to_string(),
            lat.points().to_string(),
            cell(split_err),
            cell(rkt_diag),
            cell(rkt_off),
            cell(rt),
            cell(unc),
            flags.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unimodal_profiles() {
        assert!(unimodal(&[0.1, 0.5, 1.0, 0.5, 0.2, 0.1]));
        assert!(unimodal(&[1.0, 0.5, 0.1, 0.05, 0.1, 0.5]));
        assert!(!unimodal(&[0.1, 1.0, 0.2, 0.9, 0.1, 0.05]));
    }

    #[test]
    fn sweep_guards() {
        let bad = RunConfig::from_str("sweep_parameter = x\nsweep_values = 0.5, 0.99").unwrap();
        assert!(check_sweep(&bad).is_err());
        let bad = RunConfig::from_str("sweep_parameter = M\nsweep_values = 16, 17").unwrap();
        assert!(check_sweep(&bad).is_err());
        let bad = RunConfig::from_str("sweep_parameter = M\nsweep_values = 1024").unwrap();
        assert!(check_sweep(&bad).is_err());
        let ok = RunConfig::from_str("sweep_parameter = T\nsweep_values = 0.25, 1, 4").unwrap();
        assert!(check_sweep(&ok).is_ok());
    }
}
