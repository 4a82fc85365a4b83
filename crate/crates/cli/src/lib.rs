//! `shortfall` command-line front end.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 invalid config or
//! arguments, 3 unsupported request, 4 numeric failure.

pub mod config;
pub mod render;
pub mod solve;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use shortfall_core::Error;
use thiserror::Error as ThisError;

use crate::config::{ConfigError, RawConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAPABILITY: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "shortfall", version, about = "Maximal success probability hedging under a capital constraint")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Black-Scholes call: closed-form success set.
    Bs(SolveArgs),
    /// Binomial lattice: path-level success set and replicating plan.
    Crr(SolveArgs),
    /// One-period trinomial market with endpoint martingale measures.
    Tri(SolveArgs),
    /// List every optimal success set of a discrete model.
    Candidates(SolveArgs),
    /// Check a report (or a fresh solve) with independent methods.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Problem config, key-value text or JSON.
    pub config: PathBuf,
    /// Also write the report as JSON.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Exact rational arithmetic (binomial and trinomial models).
    #[arg(long)]
    pub rational: bool,
    /// Print one row per outcome (binomial lattices up to 6 periods).
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Report JSON from an earlier run; without it a fresh solve is checked.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Monte Carlo paths for the Black-Scholes checks.
    #[arg(long, default_value_t = 1_000_000)]
    pub paths: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    /// A solve finished but its own checks flagged a problem.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Solver(Error::Capability(_)) => EXIT_CAPABILITY,
            CliError::Solver(Error::Domain(_)) => EXIT_CONFIG,
            CliError::Solver(Error::Numeric(_) | Error::Precondition(_)) | CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

pub fn read_config(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(RawConfig::parse(&text)?)
}

pub fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Parses arguments and runs one command, writing the text report to `out`
/// and diagnostics to `err`. Returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Bs(a) => solve::run_bs(a, out),
        Command::Crr(a) => solve::run_crr(a, out),
        Command::Tri(a) => solve::run_tri(a, out),
        Command::Candidates(a) => solve::run_candidates(a, out),
        Command::Verify(a) => verify::run_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
