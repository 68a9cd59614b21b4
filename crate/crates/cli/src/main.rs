//! `sentqual`: ingest revision histories, label edits, build corpora, run
//! the annotation study and train the baseline classifier.

mod commands;
mod input;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{corpus, evaluate, ingest, label, model, sample, serve};

#[derive(Debug, Parser)]
#[command(name = "sentqual", version, about = "Weakly labeled sentence-quality corpora from page edit histories")]
struct Cli {
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load revisions from a dump, JSONL file or the live API into a store
    Ingest(ingest::IngestArgs),
    /// Run the edit rules over page histories and emit positive sentences
    Label(label::LabelArgs),
    /// Emit negative sentences from Featured Article revisions
    Negatives(corpus::NegativesArgs),
    /// Build and export train/validation/test splits
    Corpus(corpus::CorpusArgs),
    /// Draw the stratified diff sample for the annotation study
    Sample(sample::SampleArgs),
    /// Run the annotation service
    Serve(serve::ServeArgs),
    /// Score an annotation log against rule labels, or a model against a corpus
    Evaluate(evaluate::EvaluateArgs),
    /// Train the hashed n-gram logistic regression baseline
    TrainBaseline(model::TrainArgs),
    /// Score sentences with a trained baseline model
    Predict(model::PredictArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = match cli.command {
        Command::Ingest(args) => ingest::run(args),
        Command::Label(args) => label::run(args),
        Command::Negatives(args) => corpus::run_negatives(args),
        Command::Corpus(args) => corpus::run(args),
        Command::Sample(args) => sample::run(args),
        Command::Serve(args) => serve::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::TrainBaseline(args) => model::run_train(args),
        Command::Predict(args) => model::run_predict(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
