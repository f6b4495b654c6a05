//! `adiag`: field files in, diagonalization and obstruction reports out.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod fieldfile;
pub mod json;
pub mod report;
pub mod svg;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_OBSTRUCTED: i32 = 2;
pub const EXIT_UNRESOLVED: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

/// Errors that end a command with exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] adiag_core::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "adiag",
    version,
    about = "Approximate diagonalization of matrix fields over meshes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diagonalize a Hermitian, unitary or projection field.
    Diagonalize(DiagonalizeArgs),
    /// Run the obstruction detectors only.
    Obstruction(ObstructionArgs),
    /// Re-check a report against its field.
    Verify(VerifyArgs),
    /// Run a built-in scenario and write its outputs.
    Demo(DemoArgs),
}

/// Where the field comes from: a file or a built-in model.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Field file (JSON).
    #[arg(required_unless_present = "model")]
    pub input: Option<PathBuf>,
    /// Built-in model instead of a file.
    #[arg(long, conflicts_with = "input")]
    pub model: Option<String>,
    /// Mesh kind for --model (interval, circle, square, torus, sphere).
    #[arg(long, requires = "model")]
    pub mesh: Option<String>,
    /// Mesh resolution for --model.
    #[arg(long = "N", requires = "model")]
    pub resolution: Option<usize>,
    /// Matrix size for models that take one.
    #[arg(long = "n", requires = "model")]
    pub size: Option<usize>,
    /// Winding of the winding-unitary model.
    #[arg(long, requires = "model", allow_negative_numbers = true)]
    pub k: Option<i32>,
    /// Degree of the berry-pullback model.
    #[arg(long, requires = "model", allow_negative_numbers = true)]
    pub degree: Option<i32>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagonalizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Target sup-norm residual (projections always use 1/4).
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Seed for the random perturbations and seeded models.
    #[arg(long, env = "ADIAG_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include the unitary field in the report.
    #[arg(long)]
    pub emit_unitary: bool,
    /// Directory for SVG plots.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// CSV file with the eigenvalue fields.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write the input as an explicit-samples field file.
    #[arg(long)]
    pub write_field: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ObstructionArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Seed for seeded models.
    #[arg(long, env = "ADIAG_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Field file the report was computed from.
    pub field: PathBuf,
    /// Report written by `diagonalize --emit-unitary`.
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    /// One of: two-by-two, circle-rotation, berry-sphere, winding-unitary, projection-sphere.
    pub name: String,
    /// Parent directory for demo outputs.
    #[arg(long, default_value = "adiag-demo")]
    pub out_dir: PathBuf,
    #[arg(long, env = "ADIAG_SEED", default_value_t = 42)]
    pub seed: u64,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Diagonalize(a) => commands::diagonalize(a),
        Command::Obstruction(a) => commands::obstruction(a),
        Command::Verify(a) => commands::verify(a),
        Command::Demo(a) => commands::demo(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("adiag: {e}");
        EXIT_USAGE
    })
}
