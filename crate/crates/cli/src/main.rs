use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvdrc_cli::config::parse_vector;
use mvdrc_cli::{commands, Output, RunOptions};

#[derive(Parser)]
#[command(
    name = "mvdrc",
    version,
    about = "Mean-variance distributionally robust control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Proposed vs conventional worst-case value across a γ sweep.
    Figure1(Flags),
    /// Exact worst case of a finite χ²-penalized instance.
    Dro(Flags),
    /// Mean-variance vs robust tabular fixed points.
    Bellman(Flags),
    /// Closed-loop rollouts and the assumption-satisfaction statistic.
    Simulate(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON input document.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; a `.meta.json` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixed-point tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Initial state, e.g. `--x0 1,0,0,0`; repeatable.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    x0: Vec<Vec<f64>>,
}

impl From<Flags> for RunOptions {
    fn from(f: Flags) -> Self {
        RunOptions {
            config: f.config,
            seed: f.seed,
            out: f.out,
            tol: f.tol,
            max_iter: f.max_iter,
            x0: f.x0,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<(Output, Option<PathBuf>)> {
    match cli.command {
        Command::Figure1(f) => commands::figure1(&f.into()),
        Command::Simulate(f) => commands::simulate(&f.into()),
        Command::Dro(f) => {
            let opts: RunOptions = f.into();
            Ok((commands::dro(&opts)?, opts.out))
        }
        Command::Bellman(f) => {
            let opts: RunOptions = f.into();
            Ok((commands::bellman(&opts)?, opts.out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (output, out) = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    // keep stdout clean when it carries the CSV
    for line in &output.summary {
        if out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    if !output.violations.is_empty() {
        for v in &output.violations {
            eprintln!("postcondition failed: {v}");
        }
        return ExitCode::from(2);
    }
    match output.emit(out.as_deref()) {
        Ok(Some(meta)) => {
            eprintln!("metadata: {}", meta.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
