//! `gmnse` command-line tool: trajectories of the stochastic, limit and
//! skeleton equations, and the verification experiments.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gmnse", version, about = "Spectral Galerkin simulator for globally modified Navier-Stokes with transport noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stochastic Galerkin trajectory as NDJSON rows.
    Simulate(RunArgs),
    /// Deterministic limit equation trajectory as NDJSON rows.
    Limit(RunArgs),
    /// Skeleton (controlled) equation trajectory as NDJSON rows.
    Skeleton(RunArgs),
    /// Corrector deviation decay in the noise cutoff n.
    CorrectorCheck(RunArgs),
    /// Distance to the limit equation as the noise flattens.
    ScalingExperiment(RunArgs),
    /// Time-integrated error against the predicted rate envelope.
    RateExperiment(RunArgs),
    /// Energy inequality audit under step halving.
    EnergyAudit(RunArgs),
    /// Skeleton equation stability under input perturbations.
    SkeletonStability(RunArgs),
}

/// Options shared by every subcommand. Flags override the environment
/// (`GMNSE_<KEY>`), which overrides the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Root seed of all random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout if absent); the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Monte Carlo replicas (experiments) or replica index (simulate).
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Noise intensity ν.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Cut-off threshold N.
    #[arg(long = "N")]
    pub threshold: Option<f64>,
    /// Cut-off norm regularity loss δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Dissipation order Λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Noise cutoff n.
    #[arg(long)]
    pub noise_n: Option<u32>,
    /// Noise decay exponent r.
    #[arg(long)]
    pub noise_r: Option<f64>,
    /// Galerkin cutoff m.
    #[arg(long)]
    pub galerkin_m: Option<u32>,
    /// Write the final state of a trajectory command to this snapshot file.
    #[arg(long)]
    pub snapshot: Option<std::path::PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Limit(a) => ("limit", a),
        Command::Skeleton(a) => ("skeleton", a),
        Command::CorrectorCheck(a) => ("corrector-check", a),
        Command::ScalingExperiment(a) => ("scaling-experiment", a),
        Command::RateExperiment(a) => ("rate-experiment", a),
        Command::EnergyAudit(a) => ("energy-audit", a),
        Command::SkeletonStability(a) => ("skeleton-stability", a),
    };
    match commands::run(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
