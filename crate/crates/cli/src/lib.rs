//! Command-line driver: configuration, parameter sweeps and file output.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<optomech::Error> for CliError {
    fn from(e: optomech::Error) -> Self {
        match e {
            optomech::Error::InvalidParameter(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "optomech", version, about = "Molecular optomechanical heat engine simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Engine overrides, e.g. "beta=1.5,g_kappa=10".
    #[arg(long, global = true)]
    pub point: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate the mean-field equations and classify the regime.
    ClassicalSim,
    /// Regime, period and power over a (g_kappa, beta) grid.
    ClassicalSweep,
    /// Analytic operational boundary over the g_kappa axis.
    Boundary,
    /// Steady state and thermodynamics at one point.
    QuantumSteady,
    /// Steady-state thermodynamics over a two-axis grid.
    QuantumSweep,
    /// Husimi, source density and flow fields plus the cavity Wigner function.
    PhaseSpace,
    /// Cavity Wigner function only.
    Wigner,
    /// Two-mode hybridization tables and effective-model fits.
    NormalModes,
    /// Grow the truncation until the observables settle.
    ConvergeDims,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ClassicalSim => "classical-sim",
            Command::ClassicalSweep => "classical-sweep",
            Command::Boundary => "boundary",
            Command::QuantumSteady => "quantum-steady",
            Command::QuantumSweep => "quantum-sweep",
            Command::PhaseSpace => "phase-space",
            Command::Wigner => "wigner",
            Command::NormalModes => "normal-modes",
            Command::ConvergeDims => "converge-dims",
        }
    }
}

/// Resolve the config and flags, then run the command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = config::RunConfig::load(path)?;
    if let Some(p) = &cli.point {
        cfg.apply_point(p)?;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        cfg.workers = Some(w);
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let out = output::Output::new(dir, cli.command.name(), &cfg)?;
    commands::dispatch(cli.command, &cfg, &out)
}
