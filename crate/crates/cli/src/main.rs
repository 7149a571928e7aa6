//! Command-line front end: patient clustering, feature selection, fluid
//! scheduling, exact MDP solves and simulation, driven by a JSON config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, CONFIG_KEYS};

#[derive(Parser, Debug)]
#[command(name = "apptsched", version, about = "Patient clustering and multi-priority appointment scheduling")]
#[command(after_help = CONFIG_KEYS)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for clustering, simulation and the model.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select features, then cluster with k-means and Ward and compare silhouettes.
    #[command(after_help = CONFIG_KEYS)]
    Cluster,
    /// Entropy ranking and wrapper feature selection only.
    #[command(after_help = CONFIG_KEYS)]
    SelectFeatures,
    /// Solve the fluid LP and extract a quota table.
    #[command(after_help = CONFIG_KEYS)]
    Schedule {
        /// Also solve the MDP exactly and report the quota table's cost gap.
        #[arg(long)]
        exact: bool,
    },
    /// Simulate a quota table.
    #[command(after_help = CONFIG_KEYS)]
    Simulate {
        /// Quota policy JSON (as written by `schedule`).
        #[arg(long, value_name = "PATH")]
        policy: Option<PathBuf>,
        /// Also compare against earliest-slot and reject-all.
        #[arg(long)]
        compare: bool,
        /// Write a per-day trace.
        #[arg(long)]
        trace: bool,
    },
    /// Value iteration over the full state space.
    #[command(after_help = CONFIG_KEYS)]
    MdpSolve,
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<apptsched::Error> for CliError {
    fn from(e: apptsched::Error) -> Self {
        Self {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::config)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    match cli.command {
        Command::Cluster => commands::cluster(&cfg),
        Command::SelectFeatures => commands::select(&cfg),
        Command::Schedule { exact } => commands::schedule(&cfg, exact),
        Command::Simulate { policy, compare, trace } => {
            commands::simulate(&cfg, policy.as_deref(), compare, trace || cfg.simulation.trace)
        }
        Command::MdpSolve => commands::mdp_solve(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
