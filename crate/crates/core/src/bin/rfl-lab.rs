use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfl_lab::cli::{error_json, load_config, run_experiment, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rfl-lab", version, about = "Ground states and concentration for the regional fractional Laplacian")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; defaults are used when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file and RFL_LAB_OUT)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Ground state of the regional problem
    Solve,
    /// Ground state of the limit problem with the full form
    Limit,
    /// Rescaled problems over a list of eps values
    Sweep,
    /// Concentration function and its minimum
    Concentration,
    /// Discrete Sobolev constant
    Sobolev,
    /// Ground-state level against the critical bound over lambda
    LambdaScan,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Solve => Experiment::Solve,
            Command::Limit => Experiment::Limit,
            Command::Sweep => Experiment::Sweep,
            Command::Concentration => Experiment::Concentration,
            Command::Sobolev => Experiment::Sobolev,
            Command::LambdaScan => Experiment::LambdaScan,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("{}", serde_json::json!({"error": {"kind": "threads", "message": e.to_string()}}));
            return ExitCode::from(2);
        }
    }
    let config = match &args.config {
        Some(path) => load_config(path),
        None => Ok(ExperimentConfig::default()),
    };
    let mut config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            return ExitCode::from(2);
        }
    };
    config.experiment = args.command.into();
    let dir = config.output_dir(args.out.as_deref());
    match run_experiment(&config, &dir) {
        Ok(outcome) => {
            println!("{}: {}", config.experiment.name(), outcome.summary);
            println!("artifacts in {}", outcome.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
