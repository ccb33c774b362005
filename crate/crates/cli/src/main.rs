//! convsep: experiments, verification checks, and estimator reports for the
//! weight-sharing vs fully-connected optimization separation.

mod config;
mod csv_out;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{Command, Config};
use run::{dispatch, Invocation, EXIT_VALIDATION};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "convsep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Run one experiment (GD on an analytic model, or SGD on the net).
    Experiment(CommonArgs),
    /// Run the numeric verification checks and write a JSON report.
    Verify(CommonArgs),
    /// Compare closed forms with the Monte Carlo oracle.
    Estimate(CommonArgs),
    /// Run a grid of experiment cells and collect a summary table.
    Sweep(CommonArgs),
}

fn main() {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        CliCommand::Experiment(a) => (Command::Experiment, a),
        CliCommand::Verify(a) => (Command::Verify, a),
        CliCommand::Estimate(a) => (Command::Estimate, a),
        CliCommand::Sweep(a) => (Command::Sweep, a),
    };
    let mut config = match Config::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e:#}");
            std::process::exit(EXIT_VALIDATION);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out_dir = args
        .out
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let code = dispatch(&Invocation {
        command,
        config,
        out_dir,
    });
    std::process::exit(code);
}
