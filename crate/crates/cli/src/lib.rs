//! Command-line front end of the QEF pipeline: JSON configuration in, CSV
//! files out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::RunConfig;
pub use error::{CliError, EXIT_CONFIG, EXIT_MISMATCH, EXIT_NUMERIC, EXIT_OK};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "QEFLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qeflab", version, about = "Spectral and risk-sensitive analysis of open quantum harmonic oscillators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the physical realizability identities and solve for the stationary state.
    ModelCheck(#[command(flatten)] CommonArgs),
    /// Compute the eigenfrequencies and the orthonormal basis.
    Eigen(#[command(flatten)] CommonArgs),
    /// Evaluate the closed-form QEF for every configured theta.
    Qef(#[command(flatten)] CommonArgs),
    /// Compare the closed form with both Monte-Carlo estimators.
    Validate(#[command(flatten)] CommonArgs),
    /// Verify the randomization identity for one truncated position-momentum pair.
    Fock(#[command(flatten)] CommonArgs),
}

#[derive(Debug, Clone, PartialEq, Eq, clap::Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::ModelCheck(a) | Command::Eigen(a) | Command::Qef(a) | Command::Validate(a) | Command::Fock(a) => a,
        }
    }
}

/// Sizes the global thread pool from `QEFLAB_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config("InvalidEnvironment", format!("{THREADS_ENV} must be a positive integer")))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    let args = command.args();
    let cfg = RunConfig::load(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match command {
        Command::ModelCheck(_) => commands::cmd_model_check(&cfg, &out),
        Command::Eigen(_) => commands::cmd_eigen(&cfg, &out),
        Command::Qef(_) => commands::cmd_qef(&cfg, &out),
        Command::Validate(_) => commands::cmd_validate(&cfg, &out, args.seed),
        Command::Fock(_) => commands::cmd_fock(&cfg, &out),
    }
}
