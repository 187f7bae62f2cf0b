use std::path::PathBuf;
use std::process::ExitCode;

use calderon_core::Error as CoreError;
use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod output;
mod setup;

use commands::Ctx;
use config::Config;
use output::OutDir;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SingularInterior { .. }
            | CoreError::IllConditioned { .. }
            | CoreError::Overflow(_)
            | CoreError::Numerical(_) => CliError::Numerical(e.to_string()),
            CoreError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "calderon", version, about = "Discrete Calderón problem experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the parallel scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Point counts of the lattice and its derived sets.
    Grid,
    /// Weight fields and their anisotropy/distortion metrics.
    Sigma,
    /// DtN matrix of a potential, and the distance to a second one.
    Dtn,
    /// Minimal Carleman surrogate ratios along a line of weights.
    CarlemanScan,
    /// CGO remainders for a list of |s|.
    Cgo,
    /// Fourier-mode stability report for a pair of potentials.
    Reconstruct,
    /// Slice-mode estimates with the exact-phase pairs.
    Uniqueness,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Grid => "grid",
            Command::Sigma => "sigma",
            Command::Dtn => "dtn",
            Command::CarlemanScan => "carleman-scan",
            Command::Cgo => "cgo",
            Command::Reconstruct => "reconstruct",
            Command::Uniqueness => "uniqueness",
        }
    }
}

fn run(cli: &Cli, out: &mut OutDir, resolved: &mut Option<serde_json::Value>) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config <path> is required".into()))?;
    let mut cfg = Config::load(path)?;
    cfg.apply_env(std::env::vars())?;
    *resolved = Some(cfg.to_json());
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    }
    let mut ctx = Ctx { cfg: &cfg, out, verbose: cli.verbose };
    match cli.command {
        Command::Grid => commands::grid(&mut ctx),
        Command::Sigma => commands::sigma(&mut ctx),
        Command::Dtn => commands::dtn(&mut ctx),
        Command::CarlemanScan => commands::carleman_scan(&mut ctx),
        Command::Cgo => commands::cgo(&mut ctx),
        Command::Reconstruct => commands::reconstruct(&mut ctx),
        Command::Uniqueness => commands::uniqueness(&mut ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = match OutDir::create(&cli.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let mut resolved = None;
    match run(&cli, &mut out, &mut resolved) {
        Ok(()) => {
            if cli.verbose {
                for p in out.written() {
                    eprintln!("wrote {}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Numerical(msg) = &e {
                let diag = json!({ "command": cli.command.name(), "error": msg, "config": resolved });
                if let Err(w) = out.write_json("diagnostics.json", &diag) {
                    eprintln!("error: could not write diagnostics: {w}");
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
