//! `cellhom <task> --config cfg.json [--seed N] [--out DIR] [--threads N]`
//!
//! Exit status: 0 on success, 2 when an assumption check fails, 1 otherwise.

mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::RunConfig;
use tasks::Task;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cellhom::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("verification failed: {0} rows did not pass")]
    VerifyFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.assumption_label().is_some() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cellhom", version, about = "Homogenization of periodic degenerate diffusions")]
struct Cli {
    #[arg(value_enum)]
    task: Task,

    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (falls back to CELLHOM_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("CELLHOM_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("CELLHOM_THREADS is not a thread count: {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let text = std::fs::read_to_string(&cli.config).map_err(cellhom::Error::from)?;
    let cfg = RunConfig::from_json(&text)?.resolve(cli.seed, cli.out);
    tasks::run(cli.task, &cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
