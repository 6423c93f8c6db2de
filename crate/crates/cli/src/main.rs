//! fusetree: exact analysis of decision fusion on regular k-ary trees.
//!
//! Exit codes: 0 success (findings included), 2 configuration errors,
//! 3 budget guards, 1 I/O failures.

mod commands;
mod config;
mod pool;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{EngineChoice, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Config(String),
    Budget(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(msg) => write!(f, "io: {msg}"),
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Budget(msg) => write!(f, "budget: {msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

/// Prints a progress line; a closed stdout (e.g. piping into `head`) ends
/// the process quietly instead of panicking.
pub(crate) fn emit_line(line: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if out
        .write_fmt(line)
        .and_then(|()| out.write_all(b"\n"))
        .is_err()
    {
        std::process::exit(0);
    }
}

macro_rules! emit {
    ($($arg:tt)*) => {
        $crate::emit_line(format_args!($($arg)*))
    };
}
pub(crate) use emit;

#[derive(Parser)]
#[command(
    name = "fusetree",
    version,
    about = "Exact error analysis for decision fusion on regular k-ary trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON, schema 1).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for sweep points.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo seed (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Engine override.
    #[arg(long, value_enum)]
    engine: Option<EngineChoice>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate traces over the configured horizon(s).
    Run(CommonArgs),
    /// Dependence graph, assumption checks, bounds, and decay tables.
    Analyze(CommonArgs),
    /// Exhaustive and LRT-restricted optimal-rule search.
    Search(CommonArgs),
    /// Monte Carlo estimates of the root error.
    Mc(CommonArgs),
    /// Closed-form bound report at the configured parameter point.
    Bounds(CommonArgs),
    /// Exponent fit over a horizon sweep.
    Fit(CommonArgs),
}

fn context(args: &CommonArgs, force_mc: bool) -> Result<commands::Context, CliError> {
    let config = ExperimentConfig::load(&args.config)?;
    let engine = if force_mc {
        EngineChoice::Mc
    } else {
        config.engine(args.engine)
    };
    let seed = config.seed_for(args.seed, engine)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(commands::Context {
        config,
        out_dir,
        jobs: args.jobs.max(1),
        engine,
        seed,
    })
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => commands::cmd_run(&context(&args, false)?),
        Command::Analyze(args) => commands::cmd_analyze(&context(&args, false)?),
        Command::Search(args) => commands::cmd_search(&context(&args, false)?),
        Command::Mc(args) => commands::cmd_mc(&context(&args, true)?),
        Command::Bounds(args) => commands::cmd_bounds(&context(&args, false)?),
        Command::Fit(args) => commands::cmd_fit(&context(&args, false)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
