//! Command-line front end for the area matcher: graph building and
//! checking, pair matching, synthetic benchmarking, scene generation,
//! and oracle fuzzing of the labeling minimizer.

mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

/// Failure classification driving the process exit code: input errors
/// (bad files, flags, configuration) exit 1, violated internal
/// invariants (checker findings, oracle mismatches) exit 2.
#[derive(Debug)]
pub enum CmdError {
    Input(String),
    Invariant(String),
}

impl CmdError {
    pub fn input(msg: impl Into<String>) -> Self {
        CmdError::Input(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        CmdError::Invariant(msg.into())
    }
}

#[derive(Parser)]
#[command(
    name = "areamatch",
    version,
    about = "Graph-structured area matching between image pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an area graph from a segmentation file.
    BuildGraph(commands::BuildGraphArgs),
    /// Verify the structural invariants of a dumped graph.
    CheckGraph(commands::CheckGraphArgs),
    /// Match areas between two segmented images.
    Match(commands::MatchArgs),
    /// Generate a synthetic scene with known ground truth.
    GenScene(commands::GenSceneArgs),
    /// Score the matcher over seeded synthetic scenes.
    Bench(commands::BenchArgs),
    /// Cross-check the exact labeling minimizer against brute force.
    FuzzMrf(commands::FuzzMrfArgs),
}

/// Applies the thread-count override before any parallel work starts.
fn init_threads() -> Result<(), CmdError> {
    let Ok(raw) = std::env::var("AREAMATCH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CmdError::input(format!("AREAMATCH_THREADS: expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CmdError::input(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::BuildGraph(args) => commands::build_graph(&args),
        Command::CheckGraph(args) => commands::check_graph_cmd(&args),
        Command::Match(args) => commands::match_cmd(&args),
        Command::GenScene(args) => commands::gen_scene_cmd(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::FuzzMrf(args) => commands::fuzz_mrf(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
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
    let outcome = init_threads().and_then(|()| run(cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Invariant(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(2)
        }
    }
}
