mod cache;
mod check;
mod config;
mod generate;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hklab", version, about = "Random walk laboratory for weighted pre-fractal graphs")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a graph and write it as hkgraph v1 plus a JSON sidecar.
    Generate(generate::GenerateArgs),
    /// Run checkers on a graph and write one JSON and one CSV per checker.
    Check(check::CheckArgs),
    /// Summarise a directory of reports as a table and a CSV.
    Report(report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Generate(args) => generate::run(&args).map(|()| ExitCode::SUCCESS),
        Command::Check(args) => check::run(&args),
        Command::Report(args) => report::run(&args),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

/// Errors surfaced to the user; every variant exits with status 2.
#[derive(Debug)]
pub enum CliError {
    Lab(hklab::LabError),
    Io(PathBuf, std::io::Error),
    Config(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lab(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
            CliError::Config(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<hklab::LabError> for CliError {
    fn from(e: hklab::LabError) -> Self {
        CliError::Lab(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_file(path: &std::path::Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

pub fn write_file(path: &std::path::Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}
