//! `xtalk`: randomness bounds, cross-talk estimates and certified bit
//! extraction for CHSH experiments with cross-talk.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BoundArgs, CertifyArgs, ChiArgs, CurveArgs, RegionsArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files (exit 2).
    Usage(String),
    /// Solver or numerical failure (exit 3).
    Numeric(String),
}

impl From<xtalk::Error> for CliError {
    fn from(e: xtalk::Error) -> Self {
        use xtalk::Error::*;
        match e {
            InvalidArgument(_) | Dimension(_) | Parse(_) | MissingData(_) | NotHermitian(_) | Io(_) | Json(_) | Csv(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "xtalk", version, about = "Randomness certification for CHSH experiments with bounded cross-talk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upper bound on the guessing probability at one (I, chi) point.
    Bound(BoundArgs),
    /// Bound curves over a range of Bell values.
    Curve(CurveArgs),
    /// Cross-talk estimates from a behavior or a device model.
    Chi(ChiArgs),
    /// Simulate, bound and extract certified random bits.
    Certify(CertifyArgs),
    /// Largest CHSH value per cross-talk budget and minimal cross-talk along
    /// the uniform/PR mixture.
    Regions(RegionsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Bound(a) => commands::bound(a),
        Command::Curve(a) => commands::curve(a),
        Command::Chi(a) => commands::chi(a),
        Command::Certify(a) => commands::certify(a),
        Command::Regions(a) => commands::regions(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

/// Writes `text` to `<dir>/<name>` when an output directory was given.
fn save(dir: Option<&PathBuf>, name: &str, text: &str) -> Result<(), CliError> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| CliError::Usage(format!("{}: {e}", d.display())))?;
        std::fs::write(d.join(name), text).map_err(|e| CliError::Usage(format!("{}: {e}", d.display())))?;
    }
    Ok(())
}
