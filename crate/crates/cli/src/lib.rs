//! Command-line front end: reads a JSON scenario, runs one analysis and
//! writes CSV tables plus a `manifest.json` describing the run.

pub mod commands;
pub mod output;
pub mod parallel;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use wlan_game::scenario::{MeasurementMode, Scenario};

use output::{sha256_hex, Manifest, OutDir};

#[derive(Debug, Parser)]
#[command(name = "wlan-game", version, about = "Contention-window and rate-adaptation game analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving the CSV tables and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the window scan step.
    #[arg(long, global = true)]
    pub step: Option<u32>,
    /// Overrides the number of simulated virtual slots.
    #[arg(long, global = true)]
    pub slots: Option<u64>,
    /// Overrides how the distributed search measures utilities.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Stationary backoff state at the rate equilibrium of the configured windows.
    Stationary,
    /// Certified rate equilibrium at the configured windows.
    RateNe,
    /// Refined contention-window equilibrium.
    MacNe,
    /// Distributed equilibrium search with its message trace.
    Algo1,
    /// Social optimum over windows and rates.
    Optimum,
    /// Equilibrium against optimum, for the full game and the rate game.
    Poa,
    /// Equilibrium and price of anarchy across user counts.
    Sweep,
    /// Virtual-slot simulation at the rate equilibrium.
    Simulate,
    /// Simulated against analytic attempt rates and throughputs.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::RateNe => "rate-ne",
            Command::MacNe => "mac-ne",
            Command::Algo1 => "algo1",
            Command::Optimum => "optimum",
            Command::Poa => "poa",
            Command::Sweep => "sweep",
            Command::Simulate => "simulate",
            Command::Validate => "validate",
        }
    }
}

/// Invalid configuration, reported with the offending field path.
#[derive(Debug, thiserror::Error)]
#[error("invalid config at {0}")]
pub struct ConfigError(pub wlan_game::scenario::FieldError);

/// Reads, overrides and validates the scenario. Returns it with the digest
/// of the file it came from.
pub fn load_scenario(args: &CommonArgs) -> Result<(Scenario, String)> {
    let path = args.config.as_ref().context("--config <path> is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut scenario = Scenario::from_json(&text).map_err(ConfigError)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(step) = args.step {
        scenario.game.step = step;
    }
    if let Some(slots) = args.slots {
        scenario.simulation.slots = slots;
    }
    if let Some(mode) = args.mode {
        scenario.game.measurement = match mode {
            Mode::Analytic => MeasurementMode::Analytic,
            Mode::Simulated => MeasurementMode::Simulated,
        };
    }
    scenario.validate().map_err(ConfigError)?;
    Ok((scenario, sha256_hex(text.as_bytes())))
}

/// Runs one subcommand. `argv` is recorded in the manifest verbatim.
pub fn run(cli: &Cli, argv: Vec<String>) -> Result<String> {
    let (scenario, config_sha256) = load_scenario(&cli.common)?;
    let mut out = OutDir::create(&cli.common.out)?;
    let summary = commands::dispatch(cli.command, &scenario, &mut out)?;
    out.finish(Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: wlan_game::VERSION.into(),
        command: cli.command.name().into(),
        args: argv,
        config_sha256,
        seed: scenario.seed,
        scenario: serde_json::to_value(&scenario)?,
        artifacts: Vec::new(),
    })?;
    Ok(summary)
}
