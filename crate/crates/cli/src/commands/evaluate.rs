use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, ValueEnum};

use sentqual_core::baseline::{evaluate_model, Model};
use sentqual_core::corpus::import_corpus;
use sentqual_core::eval::{read_annotation_log, study_report};

use crate::input::open_read;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("what").required(true).args(["log", "model"])))]
pub struct EvaluateArgs {
    /// Annotation log (JSONL of label records)
    #[arg(long, value_name = "PATH", requires = "sample")]
    pub log: Option<PathBuf>,
    /// Study sample written by `sample`
    #[arg(long, value_name = "PATH")]
    pub sample: Option<PathBuf>,
    /// Annotators a diff needs before it counts as ground truth
    #[arg(long, default_value_t = 3)]
    pub min_annotators: usize,
    /// Baseline model file
    #[arg(long, value_name = "PATH", requires = "corpus", conflicts_with = "log")]
    pub model: Option<PathBuf>,
    /// Corpus directory written by `corpus build`
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
    /// Probability above which a sentence is predicted positive
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "json")]
    pub output: Output,
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    if let (Some(log), Some(sample)) = (&args.log, &args.sample) {
        let records = read_annotation_log(open_read(log)?).with_context(|| format!("reading {}", log.display()))?;
        let sample = sentqual_annotate::load_sample(sample)?;
        let records: Vec<_> = records.into_iter().filter(|r| r.diff_id != sentqual_annotate::state::PRACTICE_ID).collect();
        let report = study_report(&records, &sample.pool_entries(), args.min_annotators);
        match args.output {
            Output::Json => {
                serde_json::to_writer_pretty(&mut stdout, &report)?;
                writeln!(stdout)?;
            }
            Output::Table => write!(stdout, "{}", report.render_table())?,
        }
        return Ok(());
    }
    let (Some(model_path), Some(corpus)) = (&args.model, &args.corpus) else {
        unreachable!("clap enforces one complete mode");
    };
    let file = File::open(model_path).with_context(|| format!("cannot open {}", model_path.display()))?;
    let model = Model::read_from(BufReader::new(file)).with_context(|| format!("reading {}", model_path.display()))?;
    if !corpus.join("manifest.json").exists() {
        anyhow::bail!("cannot open {}: no manifest.json", corpus.display());
    }
    let split = import_corpus(corpus)?;
    let part = match args.split {
        Split::Train => &split.train,
        Split::Validation => &split.validation,
        Split::Test => &split.test,
    };
    let metrics = evaluate_model(&model, part, args.threshold);
    serde_json::to_writer_pretty(&mut stdout, &metrics)?;
    writeln!(stdout)?;
    Ok(())
}
