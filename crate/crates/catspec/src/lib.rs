//! Command-line front end for `catspec-core`: campaign configs, CSV/JSON
//! files and the `catspec` workflows.
//!
//! Files use rad/s for every angular frequency (`_rad_s` columns and keys);
//! Hz inputs carry an `_hz` suffix and are converted on load.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{Grid, Session};
pub use config::CampaignConfig;
pub use error::{CliError, CliResult};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "CATSPEC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "catspec",
    version,
    about = "Frequency-noise spectroscopy of a trapped-ion motional mode"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Campaign config (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic step; overrides the config.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Lower grid edge, rad/s.
    #[arg(long, allow_negative_numbers = true)]
    pub omega_min: Option<f64>,
    /// Upper grid edge, rad/s.
    #[arg(long, allow_negative_numbers = true)]
    pub omega_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub n: Option<usize>,
}

impl From<&GridArgs> for Grid {
    fn from(g: &GridArgs) -> Self {
        Grid {
            omega_min: g.omega_min,
            omega_max: g.omega_max,
            n: g.n,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter curves per sequence plus the discretised filter matrix.
    Filters {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// `literal` or `first-order`.
        #[arg(long)]
        kernel: Option<String>,
        /// Add an `omega_tau_over_2pi` column to each curve.
        #[arg(long)]
        dimensionless: bool,
    },
    /// Single-tone sweep about each filter peak: simulated against predicted P1.
    Identify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kernel: Option<String>,
        /// Sweep the tone amplitude at the peak instead of its frequency.
        #[arg(long)]
        sweep_beta: bool,
    },
    /// Synthetic measurement campaign with projection noise.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kernel: Option<String>,
    },
    /// Spectrum estimate from a measurement table.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        kernel: Option<String>,
        /// Measurement table (CSV).
        #[arg(long, value_name = "PATH")]
        measurements: PathBuf,
    },
    /// Single-tone and broadband sensitivity limits per sequence.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        kernel: Option<String>,
        /// Smallest resolvable excitation probability.
        #[arg(long, default_value_t = 0.01)]
        p_min: f64,
    },
    /// Mean phonon number from blue-sideband flopping data.
    Thermometry {
        #[command(flatten)]
        common: Common,
        /// Flopping data (CSV `t_s, p1, sigma`).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Lamb-Dicke parameter; defaults to the first configured mode.
        #[arg(long)]
        eta: Option<f64>,
        /// Fock-state truncation.
        #[arg(long, default_value_t = catspec_core::thermometry::DEFAULT_TRUNCATION)]
        truncation: usize,
    },
}

fn session(common: &Common, required: bool) -> CliResult<Session> {
    let config = match &common.config {
        Some(path) => CampaignConfig::load(path)?,
        None if required => return Err(CliError::Validation("--config is required".into())),
        None => CampaignConfig::default(),
    };
    Ok(Session::new(config, common.seed, common.out.clone()))
}

/// Runs one command and returns the lines to print.
pub fn run(cli: &Cli) -> CliResult<Vec<String>> {
    match &cli.command {
        Command::Filters {
            common,
            grid,
            kernel,
            dimensionless,
        } => commands::filters(&session(common, true)?, &grid.into(), kernel.as_deref(), *dimensionless),
        Command::Identify {
            common,
            kernel,
            sweep_beta,
        } => commands::identify(&session(common, true)?, kernel.as_deref(), *sweep_beta),
        Command::Simulate { common, kernel } => commands::simulate(&session(common, true)?, kernel.as_deref()),
        Command::Reconstruct {
            common,
            grid,
            kernel,
            measurements,
        } => commands::reconstruct_cmd(&session(common, true)?, measurements, &grid.into(), kernel.as_deref()),
        Command::Sensitivity {
            common,
            grid,
            kernel,
            p_min,
        } => commands::sensitivity(&session(common, true)?, *p_min, &grid.into(), kernel.as_deref()),
        Command::Thermometry {
            common,
            data,
            eta,
            truncation,
        } => commands::thermometry(&session(common, false)?, data, *eta, *truncation),
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`] if it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    if n == 0 {
        return Err(CliError::Validation(format!("{THREADS_ENV} must be >= 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
}
