//! `histexpr`: run the histology-to-expression pipeline one stage at a time.

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::aggregate::AggregateArgs;
use commands::benchmark::BenchmarkArgs;
use commands::evaluate::EvaluateArgs;
use commands::preprocess::PreprocessArgs;
use commands::subtype::SubtypeArgs;
use commands::survival::SurvivalArgs;
use commands::train::{PredictArgs, TrainArgs};
use commands::Env;
use config::PipelineConfig;
use error::Result;

#[derive(Debug, Parser)]
#[command(name = "histexpr", version, about = "Predict gene expression from histology patch features")]
struct Cli {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all outputs (default `histexpr-out`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Treat skipped inputs and warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stain-normalize region images and tile them into patches.
    Preprocess(PreprocessArgs),
    /// Average the patch features of each `.h2rf` file into a slide feature.
    Aggregate(AggregateArgs),
    /// Train the regression head on slide features and expression.
    Train(TrainArgs),
    /// Predict expression for slide features with a trained model.
    Predict(PredictArgs),
    /// Correlate predicted with measured expression.
    Evaluate(EvaluateArgs),
    /// Cox and Kaplan–Meier analysis of LumA vs LumB calls.
    Survival(SurvivalArgs),
    /// Call molecular subtypes from expression.
    Subtype(SubtypeArgs),
    /// Time aggregated against patch-level training epochs.
    Benchmark(BenchmarkArgs),
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let env = Env {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        strict: cli.strict || config.strict.unwrap_or(false),
        output_dir: cli.output_dir.clone().or_else(|| config.paths.output_dir.clone()).unwrap_or_else(|| "histexpr-out".into()),
        config,
    };
    match &cli.command {
        Command::Preprocess(a) => commands::preprocess::run(&env, a),
        Command::Aggregate(a) => commands::aggregate::run(&env, a),
        Command::Train(a) => commands::train::run(&env, a),
        Command::Predict(a) => commands::train::run_predict(&env, a),
        Command::Evaluate(a) => commands::evaluate::run(&env, a),
        Command::Survival(a) => commands::survival::run(&env, a),
        Command::Subtype(a) => commands::subtype::run(&env, a),
        Command::Benchmark(a) => commands::benchmark::run(&env, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
