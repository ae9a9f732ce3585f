mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

/// Time-controlled pairwise popularity ranking.
#[derive(Parser)]
#[command(name = "pairpop", version)]
struct Cli {
    /// `key = value` settings for the subcommand (keys are long flag names);
    /// flags given on the command line win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw submission and comment files, keep active days, write a data directory
    Ingest(commands::IngestArgs),
    /// Drop unreadable images and every copy of duplicated submissions
    Dedup(commands::DedupArgs),
    /// Sample time-controlled ranked pairs per community
    Pairs(commands::PairsArgs),
    /// Write the feature vectors of every paired submission
    Featurize(commands::FeaturizeArgs),
    /// Train a pairwise ranker on all pairs
    Train(commands::TrainArgs),
    /// Cross-validate a model's features and settings
    Evaluate(commands::EvaluateArgs),
    /// Evaluate a trained model once on held-out pairs
    Heldout(commands::HeldoutArgs),
    /// Score submissions with a linear model
    Score(commands::ScoreArgs),
    /// Exploratory statistics: time profiles, mean normalization, moments, model correlations
    Analyze(commands::AnalyzeArgs),
    /// Generate a synthetic community with known quality
    Simulate(commands::SimulateArgs),
    /// Serve the pairwise human-judgment study over HTTP
    ServeAnnotate(commands::ServeArgs),
}

/// Raised for mistakes in how the tool was invoked rather than in the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn command() -> clap::Command {
    Cli::command().args_override_self(true).mut_subcommands(|s| s.args_override_self(true))
}

/// The error and its causes, skipping causes already quoted by the message
/// before them.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cmd = command();
    let argv = match config::expand(&cmd, std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return ExitCode::from(1);
        }
    };
    let cli = match cmd.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Dedup(a) => commands::dedup(a),
        Command::Pairs(a) => commands::pairs(a),
        Command::Featurize(a) => commands::featurize(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Heldout(a) => commands::heldout(a),
        Command::Score(a) => commands::score(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::ServeAnnotate(a) => commands::serve_annotate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("see `pairpop help` for usage");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
