mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{analysis, data, model};
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "deepgraph",
    version,
    about = "Substructure-token graph transformer and attention-capacity tools"
)]
struct Cli {
    /// Base seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with top-level `seed`/`out` and one table per command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as JSON Lines.
    Gen(data::GenArgs),
    /// Enumerate substructures of every graph into a cache file.
    Extract(data::ExtractArgs),
    /// Draw coverage-balanced substructure samples.
    Sample(data::SampleArgs),
    /// Train a model and write a checkpoint plus per-epoch log.
    Train(model::TrainArgs),
    /// Per-layer attention capacity of a checkpoint.
    Capacity(model::CapacityArgs),
    /// Monte Carlo checks of the capacity bounds.
    VerifyBounds(analysis::VerifyArgs),
    /// Capacity curves of masked and unmasked models over depth.
    ReproCapacity(analysis::ReproArgs),
    /// Train ablated variants on one synthetic split.
    Ablate(analysis::AblateArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = config::read_config(cli.config.as_deref())?;
    let (seed, out) = (cli.seed, cli.out);
    match cli.command {
        Command::Gen(a) => data::gen(&file, seed, out, &a),
        Command::Extract(a) => data::extract(&file, seed, out, &a),
        Command::Sample(a) => data::sample(&file, seed, out, &a),
        Command::Train(a) => model::train(&file, seed, out, &a),
        Command::Capacity(a) => model::capacity(&file, seed, out, &a),
        Command::VerifyBounds(a) => analysis::verify_bounds(&file, seed, out, &a),
        Command::ReproCapacity(a) => analysis::repro_capacity(&file, seed, out, &a),
        Command::Ablate(a) => analysis::ablate(&file, seed, out, &a),
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
            eprintln!("deepgraph: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
