use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use perco_cli::config::{diagnose, RunConfig};
use perco_cli::run::{cache_dir, execute, write_artifacts};

#[derive(Parser)]
#[command(name = "perco", version, about = "Correlated percolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Exit with status 3 when an acceptance check fails.
        #[arg(long)]
        check: bool,
        /// Output directory, overriding the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without sampling.
    Validate { config: PathBuf },
}

const EXIT_INVALID: u8 = 2;
const EXIT_CHECK: u8 = 3;

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    let cfg = RunConfig::load(path).map_err(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_INVALID)
    })?;
    let diags = diagnose(&cfg);
    if diags.is_empty() {
        return Ok(cfg);
    }
    for d in &diags {
        eprintln!("{d}");
    }
    Err(ExitCode::from(EXIT_INVALID))
}

fn run(config: PathBuf, workers: Option<usize>, check: bool, out: Option<PathBuf>) -> Result<ExitCode> {
    let cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let out = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let cache = cache_dir(&out);
    let outcome = execute(&cfg, &cache)?;
    write_artifacts(&cfg, &outcome, &out, &cache)?;
    for f in &outcome.failures {
        eprintln!("check failed: {f}");
    }
    if check && !outcome.failures.is_empty() {
        return Ok(ExitCode::from(EXIT_CHECK));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, workers, check, out } => run(config, workers, check, out),
        Command::Validate { config } => Ok(match load(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(code) => code,
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
