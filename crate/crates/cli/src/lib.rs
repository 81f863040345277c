//! `mkinterp`: fit, evaluate and analyse multi-kernel interpolants from the
//! command line.
//!
//! Exit codes: 0 success, 1 study bound violated, 2 bad input, 3 solver did
//! not converge, 4 singular design, 5 point outside the domain.

pub mod commands;
pub mod config;
pub mod failure;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "mkinterp",
    version,
    about = "Multi-kernel scattered-data interpolation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an interpolant to `x1,...,xd,y` data and write it as JSON.
    Fit(FitArgs),
    /// Evaluate a saved interpolant at points or on a grid.
    Eval(EvalArgs),
    /// Tabulate power functions and error bounds for a node set.
    Power(PowerArgs),
    /// Run a convergence study on nested node sets.
    Study(StudyArgs),
}

/// Feature model and solver settings shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Feature family: `power`, `trig` or `table`.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Number of features K.
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Weight decay rho in (0, 1).
    #[arg(long)]
    pub decay: Option<f64>,
    /// Domain box as `lo:hi` per axis, comma separated, e.g. `-1:1,0:2`.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// Feature table JSON for `--kernel table`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Even multi-kernel order m.
    #[arg(long)]
    pub order: Option<usize>,
    /// Residual tolerance of the Newton solver.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Newton iteration cap.
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Starting point: `linear` or `zero`.
    #[arg(long)]
    pub init: Option<String>,
    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (stdout when omitted, except for `fit`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Data CSV with header `x1,...,xd,y`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Fit report JSON (stdout when omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Interpolant JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Points CSV with header `x1,...,xd` (a trailing `y` column is ignored).
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    /// Node CSV with header `x1,...,xd` (a trailing `y` column is ignored).
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Evaluation points CSV; defaults to a grid over the domain.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Norm of the target function in the bound column (default 1).
    #[arg(long = "f-norm")]
    pub f_norm: Option<f64>,
    /// Grid points per axis for the fill distance estimate.
    #[arg(long = "fill-grid")]
    pub fill_grid: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// Strictly increasing node counts, comma separated.
    #[arg(long)]
    pub counts: Option<String>,
    /// Node placement: `halton` or `uniform`.
    #[arg(long)]
    pub layout: Option<String>,
    /// Grid points per axis for the fill distance estimate.
    #[arg(long = "fill-grid")]
    pub fill_grid: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Eval(a) => commands::eval(a),
        Command::Power(a) => commands::power(a),
        Command::Study(a) => commands::study(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
