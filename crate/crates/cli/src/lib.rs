//! Command-line front end: reads JSON game configs, runs the solvers and
//! oracles, and writes JSON, CSV and SVG artifacts.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};
pub use run::{curve_csv, dynamics_csv, render_curve_svg, run, Command, RunOptions, RunRequest};

#[derive(Debug, Parser)]
#[command(name = "ugc-eq", version, about = "Equilibria of user-generated-content reward games")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON game config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when omitted. `curve` also writes an
    /// SVG with the same stem.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo sample count (default 1e6 for checks, 1e5 for M7 solves).
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Deviation-gain tolerance for `verify`, or step tolerance for `dynamics`.
    #[arg(long)]
    pub tol: Option<f64>,
    /// List every equilibrium the solver reaches.
    #[arg(long)]
    pub all: bool,
    /// Curve resolution for M6 (cells, default 1000) or scan cells per unit
    /// for the grid oracle (default 20).
    #[arg(long)]
    pub grid: Option<usize>,
    /// JSON array with the profile to verify.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

impl From<Cli> for RunRequest {
    fn from(cli: Cli) -> Self {
        RunRequest {
            command: cli.command,
            config: cli.config,
            out: cli.out,
            options: RunOptions {
                seed: cli.seed,
                mc_samples: cli.mc_samples,
                tol: cli.tol,
                all: cli.all,
                grid: cli.grid,
                profile: cli.profile,
            },
        }
    }
}
