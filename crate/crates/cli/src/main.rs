//! `neuropong`: command-line front end for the closed-loop spiking Pong
//! experiment. `run` trains one network and writes a self-contained
//! artifact directory, `sweep` repeats the run across seeds and
//! aggregates the learning curves, `bench` measures iteration
//! throughput, and `replay` turns recorded logs back into plot-ready
//! tables.
//!
//! Any configuration key can be overridden on the command line as a
//! dotted path, e.g. `--snn.rate_hi=50` or `--noise.seed=9`; the
//! `--seed` and `--iterations` flags are shorthands for the two most
//! common ones and win over dotted overrides.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod manifest;

/// A command failure carrying its process exit code: 1 for usage and
/// configuration errors, 2 for runtime failures.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "neuropong",
    version,
    about = "Closed-loop spiking Pong: train, sweep, benchmark and replay",
    disable_help_subcommand = true
)]
struct Cli {
    /// Output directory (default: out/<command>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Emit one machine-readable JSON line on stdout; diagnostics go to
    /// stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and write logs, metrics and weights.
    Run(RunArgs),
    /// Train across a seed list and aggregate the learning curves.
    Sweep(SweepArgs),
    /// Measure per-iteration runtime with and without plasticity.
    Bench(BenchArgs),
    /// Convert a recorded run log into plot-ready CSV tables.
    Replay(ReplayArgs),
}

/// Flags shared by every command that loads a configuration.
#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (TOML). A run manifest also works; its embedded
    /// config is used. Omitted: built-in defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the training iteration count.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Seeds to run: comma-separated values and inclusive ranges, e.g.
    /// "1..10" or "3,5,7..9".
    #[arg(long, value_name = "LIST")]
    seeds: String,

    /// Worker threads for the sweep; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Configuration file (TOML); the [bench] section configures the
    /// benchmark itself.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for the measured iterations.
    #[arg(long)]
    seed: Option<u64>,

    /// Benchmark modes, comma separated: no-plasticity,with-plasticity.
    #[arg(long, value_name = "LIST")]
    modes: Option<String>,

    /// Network sizes, comma separated as INxOUT, e.g. "32x32,64x64".
    #[arg(long, value_name = "LIST")]
    sizes: Option<String>,

    /// Unmeasured warmup iterations per mode and size.
    #[arg(long)]
    warmup: Option<usize>,

    /// Measured iterations per mode and size.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Log to replay: an NDJSON run log or an iterations CSV.
    #[arg(value_name = "LOG")]
    input: PathBuf,

    /// Window of the trailing reward moving average, in iterations.
    #[arg(long, default_value_t = 100)]
    window: usize,
}

fn main() -> ExitCode {
    let (args, overrides) = config::split_dotted_overrides(std::env::args());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let quiet = cli.quiet;
    let out = cli.out;
    let result = match cli.command {
        Command::Run(args) => commands::run(args, &overrides, out, quiet),
        Command::Sweep(args) => commands::sweep(args, &overrides, out, quiet),
        Command::Bench(args) => commands::bench(args, &overrides, out, quiet),
        Command::Replay(args) => commands::replay(args, &overrides, out, quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
