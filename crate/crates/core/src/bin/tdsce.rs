//! Command-line front end: run a configured experiment to CSV + metadata
//! sidecar, list the built-in channel profiles, or run the self-check
//! suite. Seed precedence: SIM_SEED env var, then --seed, then config.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tdsce::channel::builtin_profiles;
use tdsce::harness::{self, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "tdsce", version, about = "TDS-OFDM link simulator and sparse channel estimation experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a Monte-Carlo experiment described by a config file
    Simulate {
        /// Experiment name (recovery_vs_g | mse_vs_snr | ber_vs_snr |
        /// cir_snapshot); must match the config file
        experiment: String,
        /// Path to the experiment config (TOML; unknown keys rejected)
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed (the SIM_SEED env var wins over this)
        #[arg(long)]
        seed: Option<u64>,
        /// Override trials per grid point
        #[arg(long)]
        trials: Option<usize>,
        /// Output CSV path; the sidecar lands next to it as <basename>.meta
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Inspect the built-in channel profiles
    Profiles {
        #[command(subcommand)]
        what: ProfilesCmd,
    },
    /// Run the invariant self-check suite
    Selftest,
}

#[derive(Subcommand)]
enum ProfilesCmd {
    /// Print one line per profile
    List,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Simulate {
            experiment,
            config,
            seed,
            trials,
            out,
        } => simulate(&experiment, &config, seed, trials, &out),
        Cmd::Profiles {
            what: ProfilesCmd::List,
        } => {
            profiles_list();
            Ok(())
        }
        Cmd::Selftest => selftest(),
    }
}

fn simulate(
    experiment: &str,
    config: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    out: &Path,
) -> Result<()> {
    let kind = ExperimentKind::parse(experiment)?;
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text)
        .with_context(|| format!("parsing config {}", config.display()))?;
    if cfg.experiment != kind {
        bail!(
            "config {} describes experiment '{}', not '{}'",
            config.display(),
            cfg.experiment.as_str(),
            experiment
        );
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Ok(env_seed) = std::env::var("SIM_SEED") {
        cfg.seed = env_seed
            .parse()
            .with_context(|| format!("SIM_SEED must be a u64, got '{env_seed}'"))?;
    }
    // Overrides can break the invariants the file satisfied.
    cfg.validate()?;

    let artifacts = harness::run(&cfg)?;
    let meta_path = out.with_extension("meta");
    fs::write(out, &artifacts.csv)
        .with_context(|| format!("writing {}", out.display()))?;
    fs::write(&meta_path, &artifacts.meta)
        .with_context(|| format!("writing {}", meta_path.display()))?;

    let rows = artifacts.csv.lines().count().saturating_sub(1);
    println!(
        "{}: {} rows -> {} (sidecar {})",
        cfg.experiment.as_str(),
        rows,
        out.display(),
        meta_path.display()
    );
    println!("config_hash {}  seed {}", harness::config_hash(&cfg), cfg.seed);
    Ok(())
}

fn profiles_list() {
    for p in builtin_profiles() {
        let span = p
            .delays_us
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        println!(
            "{:<18} paths {:<2} span {:>6.2} us  doppler {:<8} fc {:.0} MHz  [{}]",
            p.name,
            p.delays_us.len(),
            span,
            match p.doppler {
                tdsce::channel::Doppler::Static => "static".to_string(),
                tdsce::channel::Doppler::Jakes { v_mps } =>
                    format!("{:.0} km/h", v_mps * 3.6),
            },
            p.fc_hz / 1e6,
            p.source
        );
    }
}

fn selftest() -> Result<()> {
    let mut failed = 0;
    for (name, outcome) in harness::selftest() {
        match outcome {
            Ok(()) => println!("ok    {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} self-check(s) failed");
    }
    println!("all checks passed");
    Ok(())
}
