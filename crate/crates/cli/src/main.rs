//! `modcont` command-line experiment runner.
//!
//! Each subcommand reads a flat `key = value` config and writes CSV files
//! into the output directory. Exit status is 0 on success, 2 on a config
//! error and 1 on a runtime error.

// `!(x > 0.0)` style checks are kept because they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Command;
use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

#[derive(Parser, Debug)]
#[command(
    name = "modcont",
    version,
    about = "Discrete modulus of continuity experiments"
)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `threads` in the config.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Generate a dataset CSV.
    Gen,
    /// Evaluate the modulus of continuity on a grid, exactly or from a sketch.
    Modulus,
    /// Greedy cover of a dataset's sites.
    Cover,
    /// L2 error of the discrete modulus against an analytic one.
    Consistency,
    /// Piecewise-constant interpolation error per tree level.
    Interp,
    /// Multilevel Monte Carlo error for a zero-mean field.
    Mlmc,
}

impl Sub {
    fn command(self) -> Command {
        match self {
            Sub::Gen => Command::Gen,
            Sub::Modulus => Command::Modulus,
            Sub::Cover => Command::Cover,
            Sub::Consistency => Command::Consistency,
            Sub::Interp => Command::Interp,
            Sub::Mlmc => Command::Mlmc,
        }
    }
}

fn configure_threads(cfg: &Config) -> Result<(), CliError> {
    let Some(n) = cfg.opt::<usize>("threads")? else {
        return Ok(());
    };
    if n == 0 {
        return Err(CliError::Config("`threads` must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("built without the `parallel` feature; ignoring threads = {n}");
    Ok(())
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed.to_string());
    }
    if let Some(out) = &cli.out {
        cfg.set("out", out.display().to_string());
    }
    if let Some(threads) = cli.threads {
        cfg.set("threads", threads.to_string());
    }
    configure_threads(&cfg)?;
    commands::run(cli.command.command(), &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("modcont: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(1),
            }
        }
    }
}
