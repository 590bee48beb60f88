//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; lists are comma separated. Every key
//! is optional and unknown keys are rejected. Recognized keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `dim`, `length`, `points`, `mass` | lattice `D, L, M, m` | `1, 10, 64, 1` |
//! | `temperature` | `T` | `1` |
//! | `split` | list of fractions `x = T_K/T` | `0.25, 0.5, 0.75` |
//! | `particles` | `N` for the many-body suite | `2` |
//! | `statistics` | `boson`, `fermion` or both | `boson, fermion` |
//! | `suites` | suite names to run | all |
//! | `out` | output directory | `out` |
//! | `seed` | RNG seed for random operators and labels | `1` |
//! | `center` | packet center `R`, one value per axis | `L/2` on every axis |
//! | `momentum_label` | packet momentum `K` as integer grid labels | `min(3, M/2 - 1)` on axis 0 |
//! | `temperatures` | temperature list for `wavefunction` | `0.25, 1, 4` |
//! | `evolve_time` | final time of the evolution suite | `2` |
//! | `mb_points`, `mb_length` | 1D lattice for N-particle sums | `6, 8` |
//! | `coupling` | contact strength `g` with `V_q = g/L` | `1` |
//! | `random_operators` | random Hermitian operators in the Green's suite | `5` |
//! | `h0_pairs` | random label pairs for H₀ elements | `100` |
//! | `sweep_parameter`, `sweep_values` | `T`, `x` or `M` and its values | none |
//! | `tol.<suite>.<check>` | tolerance override | per check |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;
use twp_core::lattice::Lattice;
use twp_core::manybody::Statistics;
use twp_core::thermal::{MAX_SPLIT, MIN_SPLIT};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{0}' given twice")]
    Duplicate(String),
    #[error("invalid value for '{key}': {msg}")]
    Invalid { key: String, msg: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Boltzmann,
    BoltzmannRkt,
    Closure,
    Coherent,
    Evolution,
    Greens,
    Kernel,
    Manybody,
    Observables,
    Split,
    Uncertainty,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Closure,
        Suite::Boltzmann,
        Suite::BoltzmannRkt,
        Suite::Split,
        Suite::Kernel,
        Suite::Observables,
        Suite::Uncertainty,
        Suite::Evolution,
        Suite::Coherent,
        Suite::Manybody,
        Suite::Greens,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Closure => "closure",
            Suite::Boltzmann => "boltzmann_rt",
            Suite::BoltzmannRkt => "boltzmann_rkt",
            Suite::Split => "split",
            Suite::Kernel => "kernel",
            Suite::Observables => "observables",
            Suite::Uncertainty => "uncertainty",
            Suite::Evolution => "evolution",
            Suite::Coherent => "coherent",
            Suite::Manybody => "manybody",
            Suite::Greens => "greens",
        }
    }

    /// Base names of the checks this suite emits; `tol.<suite>.<base>` overrides them.
    pub fn checks(self) -> &'static [&'static str] {
        match self {
            Suite::Closure => &["one_particle", "one_particle_delta"],
            Suite::Boltzmann => &["reconstruction", "trace", "semigroup"],
            Suite::BoltzmannRkt => &["diagonal", "off_diagonal"],
            Suite::Split => &["window"],
            Suite::Kernel => &["gaussian", "split_origin", "split_unit"],
            Suite::Observables => &[
                "norm",
                "momentum_mean",
                "position_mean",
                "energy_mean_lattice",
                "energy_mean_continuum",
                "energy_variance_lattice",
                "energy_variance_continuum",
                "energy_mean_moving",
                "localization",
            ],
            Suite::Uncertainty => &["product", "delta_k", "delta_x"],
            Suite::Evolution => &["norm_drift", "momentum_drift", "position_track", "fidelity_monotone"],
            Suite::Coherent => &["width_matched_frequency", "distance", "cold_fidelity", "hot_localization"],
            Suite::Manybody => &["closure", "boltzmann_rt", "pauli", "h0_elements", "v_reassembly", "hermiticity"],
            Suite::Greens => &["weights", "unmatched", "sum_rule", "projector"],
        }
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    Temperature,
    Split,
    Points,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub lattice: Lattice,
    pub temperature: f64,
    pub split: Vec<f64>,
    pub particles: usize,
    pub statistics: Vec<Statistics>,
    pub suites: Vec<Suite>,
    pub out: PathBuf,
    pub seed: u64,
    pub center: [f64; 3],
    pub momentum_label: [i64; 3],
    pub temperatures: Vec<f64>,
    pub evolve_time: f64,
    pub mb_points: usize,
    pub mb_length: f64,
    pub coupling: f64,
    pub random_operators: usize,
    pub h0_pairs: usize,
    pub sweep: Option<(SweepParameter, Vec<f64>)>,
    pub tolerances: BTreeMap<String, f64>,
}

const KEYS: &[&str] = &[
    "dim",
    "length",
    "points",
    "mass",
    "temperature",
    "split",
    "particles",
    "statistics",
    "suites",
    "out",
    "seed",
    "center",
    "momentum_label",
    "temperatures",
    "evolve_time",
    "mb_points",
    "mb_length",
    "coupling",
    "random_operators",
    "h0_pairs",
    "sweep_parameter",
    "sweep_values",
];

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), msg: msg.into() }
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| invalid(key, format!("'{v}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

/// Splits `text` into key-value pairs, rejecting malformed lines and repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        let k = k.trim().to_string();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, msg: "empty key".into() });
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::Duplicate(k));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_pairs(parse_pairs(&std::fs::read_to_string(path)?)?)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(parse_pairs(text)?)
    }

    pub fn from_pairs(raw: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut tolerances = BTreeMap::new();
        for (k, v) in &raw {
            if let Some(rest) = k.strip_prefix("tol.") {
                let (suite, check) = rest.split_once('.').ok_or_else(|| ConfigError::UnknownKey(k.clone()))?;
                let s: Suite = suite.parse().map_err(|_| ConfigError::UnknownKey(k.clone()))?;
                if !s.checks().contains(&check) {
                    return Err(ConfigError::UnknownKey(k.clone()));
                }
                let tol: f64 = parse_one(k, v)?;
                if !(tol >= 0.0) {
                    return Err(invalid(k, "tolerance must be nonnegative"));
                }
                tolerances.insert(rest.to_string(), tol);
            } else if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(k.clone()));
            }
        }
        let get = |k: &str| raw.get(k).map(String::as_str);

        let dim: usize = get("dim").map_or(Ok(1), |v| parse_one("dim", v))?;
        let length: f64 = get("length").map_or(Ok(10.0), |v| parse_one("length", v))?;
        let points: usize = get("points").map_or(Ok(64), |v| parse_one("points", v))?;
        let mass: f64 = get("mass").map_or(Ok(1.0), |v| parse_one("mass", v))?;
        let lattice = Lattice::new(dim, length, points, mass).map_err(|e| invalid("lattice", e.to_string()))?;

        let temperature: f64 = get("temperature").map_or(Ok(1.0), |v| parse_one("temperature", v))?;
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(invalid("temperature", "must be positive"));
        }
        let split: Vec<f64> = get("split").map_or(Ok(vec![0.25, 0.5, 0.75]), |v| parse_list("split", v))?;
        if split.is_empty() {
            return Err(invalid("split", "needs at least one fraction"));
        }
        if let Some(x) = split.iter().find(|x| !(MIN_SPLIT..=MAX_SPLIT).contains(*x)) {
            return Err(invalid("split", format!("{x} outside [{MIN_SPLIT}, {MAX_SPLIT}]")));
        }
        let particles: usize = get("particles").map_or(Ok(2), |v| parse_one("particles", v))?;
        if !(1..=3).contains(&particles) {
            return Err(invalid("particles", "N-particle sums support 1 to 3 particles"));
        }
        let statistics: Vec<Statistics> =
            get("statistics").map_or(Ok(vec![Statistics::Boson, Statistics::Fermion]), |v| parse_list("statistics", v))?;
        if statistics.is_empty() {
            return Err(invalid("statistics", "empty list"));
        }
        let suites: Vec<Suite> = get("suites").map_or(Ok(Suite::ALL.to_vec()), |v| parse_list("suites", v))?;
        let out = PathBuf::from(get("out").unwrap_or("out"));
        let seed: u64 = get("seed").map_or(Ok(1), |v| parse_one("seed", v))?;

        let mut center = [0.0; 3];
        match get("center") {
            Some(v) => {
                let c: Vec<f64> = parse_list("center", v)?;
                if c.len() != dim {
                    return Err(invalid("center", format!("expected {dim} components")));
                }
                center[..dim].copy_from_slice(&c);
            }
            None => center[..dim].fill(length / 2.0),
        }
        let mut momentum_label = [0i64; 3];
        match get("momentum_label") {
            Some(v) => {
                let k: Vec<i64> = parse_list("momentum_label", v)?;
                if k.len() != dim {
                    return Err(invalid("momentum_label", format!("expected {dim} components")));
                }
                momentum_label[..dim].copy_from_slice(&k);
            }
            None => momentum_label[0] = 3.min(points as i64 / 2 - 1),
        }
        let half = points as i64 / 2;
        if momentum_label.iter().any(|&n| n < -half || n >= half) {
            return Err(invalid("momentum_label", format!("labels must lie in [-{half}, {half})")));
        }

        let temperatures: Vec<f64> =
            get("temperatures").map_or(Ok(vec![0.25, 1.0, 4.0]), |v| parse_list("temperatures", v))?;
        if temperatures.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(invalid("temperatures", "all temperatures must be positive"));
        }
        let evolve_time: f64 = get("evolve_time").map_or(Ok(2.0), |v| parse_one("evolve_time", v))?;
        if !(evolve_time >= 0.0 && evolve_time.is_finite()) {
            return Err(invalid("evolve_time", "must be nonnegative"));
        }
        let mb_points: usize = get("mb_points").map_or(Ok(6), |v| parse_one("mb_points", v))?;
        let mb_length: f64 = get("mb_length").map_or(Ok(8.0), |v| parse_one("mb_length", v))?;
        Lattice::new(1, mb_length, mb_points, mass).map_err(|e| invalid("mb_points", e.to_string()))?;
        let coupling: f64 = get("coupling").map_or(Ok(1.0), |v| parse_one("coupling", v))?;
        let random_operators: usize = get("random_operators").map_or(Ok(5), |v| parse_one("random_operators", v))?;
        let h0_pairs: usize = get("h0_pairs").map_or(Ok(100), |v| parse_one("h0_pairs", v))?;

        let sweep = match (get("sweep_parameter"), get("sweep_values")) {
            (None, None) => None,
            (Some(p), Some(v)) => {
                let param = match p {
                    "T" => SweepParameter::Temperature,
                    "x" => SweepParameter::Split,
                    "M" => SweepParameter::Points,
                    other => return Err(invalid("sweep_parameter", format!("'{other}' is not one of T, x, M"))),
                };
                let values: Vec<f64> = parse_list("sweep_values", v)?;
                if values.is_empty() {
                    return Err(invalid("sweep_values", "empty list"));
                }
                Some((param, values))
            }
            _ => return Err(invalid("sweep_parameter", "sweep_parameter and sweep_values go together")),
        };

        Ok(Self {
            lattice,
            temperature,
            split,
            particles,
            statistics,
            suites,
            out,
            seed,
            center,
            momentum_label,
            temperatures,
            evolve_time,
            mb_points,
            mb_length,
            coupling,
            random_operators,
            h0_pairs,
            sweep,
            tolerances,
        })
    }

    pub fn tolerance(&self, suite: Suite, check: &str, default: f64) -> f64 {
        debug_assert!(suite.checks().contains(&check), "{}.{check} is not registered", suite.name());
        self.tolerances
            .get(&format!("{}.{check}", suite.name()))
            .copied()
            .unwrap_or(default)
    }

    /// Every effective setting as text, for the report header.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        }
        let d = self.lattice.dim();
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("dim", d.to_string());
        put("length", self.lattice.length().to_string());
        put("points", self.lattice.points().to_string());
        put("mass", self.lattice.mass().to_string());
        put("temperature", self.temperature.to_string());
        put("split", list(&self.split));
        put("particles", self.particles.to_string());
        put("statistics", list(&self.statistics));
        put("suites", self.suites.iter().map(|s| s.name()).collect::<Vec<_>>().join(","));
        put("seed", self.seed.to_string());
        put("center", list(&self.center[..d]));
        put("momentum_label", list(&self.momentum_label[..d]));
        put("temperatures", list(&self.temperatures));
        put("evolve_time", self.evolve_time.to_string());
        put("mb_points", self.mb_points.to_string());
        put("mb_length", self.mb_length.to_string());
        put("coupling", self.coupling.to_string());
        put("random_operators", self.random_operators.to_string());
        put("h0_pairs", self.h0_pairs.to_string());
        for (k, v) in &self.tolerances {
            m.insert(format!("tol.{k}"), v.to_string());
        }
        m
    }

    pub fn momentum(&self) -> [f64; 3] {
        self.lattice.label_to_momentum(self.momentum_label)
    }

    pub fn mb_lattice(&self) -> Lattice {
        Lattice::new(1, self.mb_length, self.mb_points, self.lattice.mass()).expect("validated at parse time")
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_pairs(BTreeMap::new()).expect("defaults are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_describe_the_reference_box() {
        let c = RunConfig::default();
        assert_eq!(c.lattice, Lattice::new(1, 10.0, 64, 1.0).unwrap());
        assert_eq!(c.center[0], 5.0);
        assert!((c.momentum()[0] - 1.884_955_592_153_876).abs() < 1e-12);
        assert_eq!(c.suites.len(), 11);
    }

    #[test]
    fn parses_comments_lists_and_overrides() {
        let c = RunConfig::from_str(
            "# box\npoints = 32 # fewer\nsplit = 0.5\nstatistics = fermion\ntol.split.window = 1e-5\n",
        )
        .unwrap();
        assert_eq!(c.lattice.points(), 32);
        assert_eq!(c.split, vec![0.5]);
        assert_eq!(c.statistics, vec![Statistics::Fermion]);
        assert_eq!(c.tolerance(Suite::Split, "window", 1e-6), 1e-5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::from_str("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::from_str("tol.split.nope = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::from_str("dim = 1\ndim = 2"), Err(ConfigError::Duplicate(_))));
        assert!(matches!(RunConfig::from_str("points"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(RunConfig::from_str("points = 63").is_err());
        assert!(RunConfig::from_str("suites = closure, bogus").is_err());
        assert!(RunConfig::from_str("split = 0.99").is_err());
        assert!(RunConfig::from_str("temperature = -1").is_err());
        assert!(RunConfig::from_str("sweep_parameter = x").is_err());
        assert!(RunConfig::from_str("sweep_parameter = q\nsweep_values = 1").is_err());
    }
}
