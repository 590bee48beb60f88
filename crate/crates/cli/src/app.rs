//! Command-line verbs and exit codes.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::config::{ConfigError, RunConfig, Suite};
use crate::dump;
use crate::suites;

#[derive(Parser, Debug)]
#[command(name = "twp", version, about = "Thermal wave-packet verification and data dumps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the `out` key.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suite to run (repeatable); overrides the `suites` key.
    #[arg(long = "suite", global = true)]
    pub suites: Vec<Suite>,
    /// RNG seed; overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run suites on separate threads.
    #[arg(long, global = true)]
    pub parallel: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Run verification suites and write report.json.
    Verify,
    /// Dump |R,T⟩ and |R,K,T⟩ profiles for each configured temperature.
    Wavefunction,
    /// Dump the exact and Gaussian thermal kernels.
    Kernel,
    /// Dump spectral lines of G> for a seeded random Hermitian operator.
    Spectrum,
    /// Dump identity errors along sweep_parameter.
    Sweep,
}

/// `0` success, `1` failed checks or runtime error, `2` configuration error.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failed,
    ConfigError,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Failed => 1,
            Outcome::ConfigError => 2,
        }
    }
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(o.code())
    }
}

/// Applies command-line overrides on top of the configuration file.
pub fn resolve(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if !cli.suites.is_empty() {
        cfg.suites = cli.suites.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Outcome {
    let cfg = match resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return Outcome::ConfigError;
        }
    };
    match cli.command {
        Command::Wavefunction if cfg.temperatures.is_empty() => {
            eprintln!("config error: temperatures is empty");
            return Outcome::ConfigError;
        }
        Command::Sweep => {
            if let Err(e) = dump::check_sweep(&cfg) {
                eprintln!("config error: {e}");
                return Outcome::ConfigError;
            }
        }
        _ => {}
    }
    match run(cli.command, &cfg, cli.parallel) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            Outcome::Failed
        }
    }
}

fn run(command: Command, cfg: &RunConfig, parallel: bool) -> anyhow::Result<Outcome> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    match command {
        Command::Verify => {
            let report = suites::run(cfg, &cfg.suites, parallel);
            for c in &report.checks {
                let measured = c.measured.map_or("error".to_string(), |m| format!("{m:.3e}"));
                println!(
                    "{} {}.{} measured={} tol={:.1e} flags={}{}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.suite,
                    c.name,
                    measured,
                    c.tolerance,
                    match (c.flags.uv, c.flags.ir) {
                        (false, false) => "ok",
                        (true, false) => "uv",
                        (false, true) => "ir",
                        (true, true) => "uv+ir",
                    },
                    if c.pass { String::new() } else { format!(" reason={}", c.reason) }
                );
            }
            let path = cfg.out.join("report.json");
            std::fs::write(&path, report.to_json() + "\n").with_context(|| format!("cannot write {}", path.display()))?;
            println!(
                "{} of {} checks passed; report in {}",
                report.summary.passed,
                report.summary.total,
                path.display()
            );
            Ok(if report.all_passed() { Outcome::Success } else { Outcome::Failed })
        }
        Command::Wavefunction => {
            let s = dump::wavefunction(cfg, &cfg.out)?;
            for p in &s.profiles {
                println!(
                    "T={} variance={:.6e} sign_changes={} unimodal={} -> {}",
                    p.temperature, p.variance, p.sign_changes, p.unimodal_modulus, p.file
                );
            }
            println!("localization_monotone={} oscillatory={}", s.localization_monotone, s.oscillatory);
            Ok(if s.passed() { Outcome::Success } else { Outcome::Failed })
        }
        Command::Kernel => {
            println!("{}", dump::kernel(cfg, &cfg.out)?.display());
            Ok(Outcome::Success)
        }
        Command::Spectrum => {
            println!("{}", dump::spectrum(cfg, &cfg.out)?.display());
            Ok(Outcome::Success)
        }
        Command::Sweep => {
            println!("{}", dump::sweep(cfg, &cfg.out)?.display());
            Ok(Outcome::Success)
        }
    }
}
