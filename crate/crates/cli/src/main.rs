//! `latsent`: silver-label sentiment annotation, training and evaluation.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::*;

/// Bad invocation: exit code 1 rather than 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::error::Error for UsageError {}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Parser)]
#[command(name = "latsent", version, about = "Sentiment silver-label annotation toolkit")]
struct Cli {
    /// JSON pipeline config; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label sentences by polarity-coordinate clustering.
    AnnotatePc(AnnotatePcArgs),
    /// Grid-search a four-component GMM on labelled sentences.
    FitGmm(FitGmmArgs),
    /// Label sentences with a fitted GMM.
    AnnotateGmm(AnnotateGmmArgs),
    /// Write seeded 80/10/10 train/validation/test id lists.
    Split(SplitArgs),
    /// Train the softmax classifier.
    Train(TrainArgs),
    /// Random hyperparameter search over classifier configurations.
    Search(SearchArgs),
    /// Predict labels with a trained classifier.
    Predict(PredictArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Cohen's kappa between two labelings.
    Agreement(AgreementArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(path) => config::PipelineConfig::load(path)?,
        None => config::PipelineConfig::default(),
    };
    match cli.command {
        Command::AnnotatePc(a) => annotate_pc(a, &cfg),
        Command::FitGmm(a) => fit_gmm(a, &cfg),
        Command::AnnotateGmm(a) => annotate_gmm(a, &cfg),
        Command::Split(a) => split(a, &cfg),
        Command::Train(a) => train(a, &cfg),
        Command::Search(a) => search(a, &cfg),
        Command::Predict(a) => predict(a, &cfg),
        Command::Evaluate(a) => evaluate(a, &cfg),
        Command::Agreement(a) => agreement(a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("\nRun `latsent --help` for usage.");
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
