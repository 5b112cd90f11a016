//! `gibbs` command-line interface.
//!
//! Exit codes: 0 success, 1 assertion/verification failure, 2 configuration
//! error, 3 I/O error.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gibbs::Error;

use config::{preset, RunConfig, PRESET_NAMES};

#[derive(Parser)]
#[command(
    name = "gibbs",
    version,
    about = "Gibbs-posterior inference: SMC calibration of the loss weight W, \
             posterior sampling, predictive model selection, and numerical verification"
)]
struct Cli {
    /// JSON run configuration; flags override file values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in experiment preset: toy-fredholm | surrogate-waveguide | conjugate.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Master seed controlling simulation and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Particle count S.
    #[arg(long, global = true)]
    particles: Option<usize>,
    /// Metropolis-Hastings steps K per mutation phase.
    #[arg(long = "mh-steps", global = true)]
    mh_steps: Option<usize>,
    /// Normalized ESS threshold triggering resample + mutate.
    #[arg(long = "ess-threshold", global = true)]
    ess_threshold: Option<f64>,
    /// Selection rule: min | one-se.
    #[arg(long, global = true)]
    rule: Option<String>,
    /// Skip calibration and fix W = 1 when sampling.
    #[arg(long, global = true)]
    bayes: bool,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Emit static SVG plots alongside the CSV reports.
    #[arg(long, global = true)]
    plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it with its metadata sidecar.
    Simulate {
        /// Force every noise amplitude to zero.
        #[arg(long = "zero-noise")]
        zero_noise: bool,
    },
    /// Run the W-grid particle filter and select W* by LOOCV.
    Calibrate,
    /// Sample the full-data Gibbs posterior from the checkpoint at W*.
    Sample,
    /// Calibrate every configured loss and rank them by P_CV.
    Select,
    /// Run a numerical verification suite:
    /// stability | approximation | consistency | predictive | inequalities | oracle-equivalence.
    Verify { suite: String },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::DegenerateData(_) | Error::Serde(_) => 2,
        Error::Io(_) | Error::Csv(_) => 3,
        _ => 1,
    }
}

/// Resolve the run configuration: exactly one of --preset/--config supplies
/// the base document, then individual flags override fields.
fn resolve_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match (&cli.preset, &cli.config) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "pass either --preset or --config, not both".into(),
            ));
        }
        (Some(name), None) => preset(name).ok_or_else(|| {
            Error::Config(format!("unknown preset '{name}'; available: {PRESET_NAMES:?}"))
        })?,
        (None, Some(path)) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        (None, None) => {
            return Err(Error::Config(
                "no configuration: pass --preset NAME or --config PATH".into(),
            ));
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(particles) = cli.particles {
        cfg.particles = particles;
    }
    if let Some(k) = cli.mh_steps {
        cfg.mh_steps = k;
    }
    if let Some(e) = cli.ess_threshold {
        cfg.ess_threshold = e;
    }
    if let Some(rule) = &cli.rule {
        cfg.rule = rule.clone();
    }
    if cli.bayes {
        cfg.bayes = true;
    }
    if cli.plots {
        cfg.plots = true;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Simulate { zero_noise } => {
            commands::cmd_simulate(&resolve_config(cli)?, *zero_noise)
        }
        Command::Calibrate => commands::cmd_calibrate(&resolve_config(cli)?),
        Command::Sample => commands::cmd_sample(&resolve_config(cli)?),
        Command::Select => commands::cmd_select(&resolve_config(cli)?),
        Command::Verify { suite } => {
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("runs/verify-{suite}")));
            commands::cmd_verify(suite, &out, cli.seed.unwrap_or(0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
