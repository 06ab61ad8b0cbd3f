mod commands;
mod config;
mod error;
mod sample;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bnn-mcmc", version, about = "Bayesian linear models and neural networks sampled by MCMC")]
struct Cli {
    /// Base random seed. Chain i of a run uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for every file a command writes.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads for parallel chains (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Independence sampler for the success probability of a binomial.
    Demo(commands::DemoArgs),
    /// Sample a linear model or neural network on a dataset.
    Sample(Box<sample::SampleArgs>),
    /// Predictions with a 95% band from a finished run.
    Predict(commands::PredictArgs),
    /// Posterior summary and split R-hat over chain files.
    Diagnose(commands::DiagnoseArgs),
    /// Window a univariate series into lagged inputs and targets.
    Window(commands::WindowArgs),
}

/// Options shared by every command after flag parsing.
#[derive(Debug, Clone)]
pub struct Global {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub config: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let global = Global {
        seed: cli.seed,
        out_dir: cli.out_dir,
        jobs: cli.jobs,
        config: cli.config,
    };
    match cli.command {
        Command::Demo(a) => commands::demo(&global, &a),
        Command::Sample(a) => sample::sample(&global, &a),
        Command::Predict(a) => commands::predict(&global, &a),
        Command::Diagnose(a) => commands::diagnose(&global, &a),
        Command::Window(a) => commands::window(&global, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
