use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use sentqual_core::baseline::{train, Model, TrainOptions};
use sentqual_core::corpus::import_corpus;

use crate::input::{open_read, open_write, write_json_line};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory written by `corpus build`
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Model file to write
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: u32,
    #[arg(long, default_value_t = 0.5)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run_train(args: TrainArgs) -> Result<()> {
    if !args.corpus.join("manifest.json").exists() {
        bail!("cannot open {}: no manifest.json", args.corpus.display());
    }
    let split = import_corpus(&args.corpus)?;
    let options = TrainOptions {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        l2: args.l2,
        seed: args.seed,
    };
    let (model, log) = train(&split.train, &split.validation, &options)?;
    let file = File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut writer = BufWriter::new(file);
    model.write_to(&mut writer)?;
    writer.flush()?;
    let mut stdout = std::io::stdout().lock();
    for entry in &log {
        write_json_line(&mut stdout, entry)?;
    }
    eprintln!("train-baseline: {} examples, model written to {}", split.train.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Plain-text sentences, one per line (`-` reads stdin)
    #[arg(long = "in", value_name = "PATH", default_value = "-")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Output file (default stdout)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Prediction<'a> {
    text: &'a str,
    probability: f64,
    positive: bool,
}

pub fn run_predict(args: PredictArgs) -> Result<()> {
    let file = File::open(&args.model).with_context(|| format!("cannot open {}", args.model.display()))?;
    let model = Model::read_from(BufReader::new(file)).with_context(|| format!("reading {}", args.model.display()))?;
    let mut out = open_write(args.out.as_deref())?;
    for line in open_read(&args.input)?.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let probability = model.predict(&line);
        write_json_line(
            &mut out,
            &Prediction {
                text: &line,
                probability,
                positive: probability > args.threshold,
            },
        )?;
    }
    out.flush()?;
    Ok(())
}
