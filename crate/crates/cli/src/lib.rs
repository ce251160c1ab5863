//! Command-line front end for the `d2dcache-core` models: configuration,
//! experiment orchestration and CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use d2dcache_core::optimize::DetObjective;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use output::Table;

#[derive(Debug, Parser)]
#[command(
    name = "d2dcache",
    version,
    about = "D2D video caching: analysis, optimization and simulation"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream (overrides `seed` in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Config override, `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write a gnuplot script next to each CSV.
    #[arg(long, global = true)]
    pub plot: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptCaching {
    Deterministic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    MaxActive,
    MinDelay,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// E[A], activity and self-requests vs r under deterministic caching.
    AnalyticDet,
    /// E[A] vs r under random caching (Monte Carlo or exact).
    AnalyticRand,
    /// Protocol-model simulation of active clusters vs r.
    GeoSim,
    /// Pathloss/shadowing simulation of the total rate vs r.
    PhySim,
    /// Best collaboration distance (and caching exponent).
    Optimize {
        #[arg(long, value_enum, default_value = "deterministic")]
        caching: OptCaching,
        #[arg(long, value_enum, default_value = "max-active")]
        objective: Objective,
    },
    /// Scaling of the optimum with the number of users.
    Asymptotics,
    /// Data behind one figure.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(3..=14))]
        number: u8,
    },
    /// Deterministic vs random vs most-popular-only caching.
    Compare,
}

impl Command {
    pub fn label(&self) -> String {
        match self {
            Command::AnalyticDet => "analytic-det".into(),
            Command::AnalyticRand => "analytic-rand".into(),
            Command::GeoSim => "geo-sim".into(),
            Command::PhySim => "phy-sim".into(),
            Command::Optimize { caching, objective } => {
                format!("optimize --caching {caching:?} --objective {objective:?}").to_lowercase()
            }
            Command::Asymptotics => "asymptotics".into(),
            Command::Figure { number } => format!("figure {number}"),
            Command::Compare => "compare".into(),
        }
    }
}

/// Loads the configuration with the command-line seed applied.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

/// Computes the tables for `command`.
pub fn tables(command: &Command, cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let t = match *command {
        Command::AnalyticDet => commands::analytic_det(cfg)?,
        Command::AnalyticRand => commands::analytic_rand(cfg)?,
        Command::GeoSim => commands::geo_sim(cfg)?,
        Command::PhySim => commands::phy_sim(cfg)?,
        Command::Optimize { caching, objective } => match (caching, objective) {
            (OptCaching::Deterministic, Objective::MaxActive) => {
                commands::optimize_det(cfg, DetObjective::MaxActive)?
            }
            (OptCaching::Deterministic, Objective::MinDelay) => {
                commands::optimize_det(cfg, DetObjective::MinDelay(cfg.delay_weights()?))?
            }
            (OptCaching::Random, Objective::MaxActive) => commands::optimize_rand(cfg)?,
            (OptCaching::Random, Objective::MinDelay) => {
                return Err(CliError::validation(
                    "objective",
                    "the delay objective is only available for deterministic caching",
                ))
            }
        },
        Command::Asymptotics => commands::asymptotics(cfg)?,
        Command::Figure { number } => commands::figure(cfg, number)?,
        Command::Compare => commands::compare(cfg, "compare")?,
    };
    Ok(vec![t])
}

/// Runs `cli` end to end and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = load_config(cli)?;
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::validation("--threads", "must be positive"));
        }
        // A second call in one process keeps the first pool, which is harmless
        // because results do not depend on the thread count.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
    let label = cli.command.label();
    let mut written = Vec::new();
    for t in tables(&cli.command, &cfg)? {
        written.push(t.write(&cli.out, &label, &cfg)?);
        if cli.plot {
            written.push(t.write_gnuplot(&cli.out)?);
        }
    }
    Ok(written)
}
