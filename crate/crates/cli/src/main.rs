//! Batch experiment driver: synthetic data, fitting, evaluation, (s, p)
//! search and method comparison, all emitting CSV.

mod commands;
mod config;
mod error;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "r2dpca", version, about = "Relaxed 2DPCA experiments")]
struct Cli {
    /// Flat `key = value` experiment file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Scan the whole (s, p) grid instead of searching it.
    #[arg(long, global = true)]
    exhaustive: bool,

    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model on the first split and write model.bin.
    Fit,
    /// Accuracy for each rank, averaged over repeats.
    Eval {
        /// Score a saved model instead of fitting one per repeat.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Search the (s, p) grid for the best accuracy.
    Search,
    /// One accuracy row per configured method.
    Compare,
    /// Write a synthetic dataset as PGM images plus a manifest.
    Synth,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for pair in &cli.set {
        cfg.apply_override(pair)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if cli.exhaustive && !matches!(cli.command, Command::Search) {
        return Err(CliError::config("--exhaustive only applies to search"));
    }
    match cli.command {
        Command::Fit => commands::cmd_fit(&cfg),
        Command::Eval { model } => commands::cmd_eval(&cfg, model.as_deref()),
        Command::Search => commands::cmd_search(&cfg, cli.exhaustive),
        Command::Compare => commands::cmd_compare(&cfg),
        Command::Synth => commands::cmd_synth(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
