mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ColdStartArgs, ConvergenceArgs, FitArgs, GraphBuildArgs, PredictArgs, SyntheticArgs};

const PRECEDENCE: &str = "Settings are resolved per key: an explicit command-line flag wins, \
then the value in the --config file, then the built-in default.";

/// Learn attachment models for incoming graph nodes and run the benchmark experiments.
#[derive(Debug, Parser)]
#[command(name = "expandgraph", version, after_help = PRECEDENCE)]
struct Cli {
    /// Worker threads for parallel trials and fits (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthetic benchmark: MSE of every method over repeated trials.
    #[command(after_help = PRECEDENCE)]
    Synthetic(SyntheticArgs),
    /// Cost traces from random restarts in the nonconvex and convex regimes.
    #[command(after_help = PRECEDENCE)]
    Convergence(ConvergenceArgs),
    /// Cold-start rating prediction on MovieLens-100K.
    #[command(after_help = PRECEDENCE)]
    Coldstart(ColdStartArgs),
    /// Fit an attachment model from a graph, a signal and training nodes.
    Fit(FitArgs),
    /// Predict the signal at an incoming node under a fitted model.
    Predict(PredictArgs),
    /// Generate or derive a graph and write it as an edge list.
    GraphBuild(GraphBuildArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Synthetic(a) => commands::synthetic(a),
        Command::Convergence(a) => commands::convergence(a),
        Command::Coldstart(a) => commands::coldstart(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::GraphBuild(a) => commands::graph_build(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
