use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};

use sentqual_core::corpus::{build_splits, export_corpus, extract_negative_sentences, read_sentences, Polarity};
use sentqual_core::revision::QualityClass;
use sentqual_core::Category;

use crate::input::{open_read, open_write, write_json_line, RevisionSource};

#[derive(Debug, Args)]
pub struct NegativesArgs {
    #[command(flatten)]
    pub source: RevisionSource,
    #[arg(long)]
    pub category: Category,
    /// Output file (default stdout)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Sentences of the latest revision of every Featured Article page.
pub fn run_negatives(args: NegativesArgs) -> Result<()> {
    let mut out = open_write(args.out.as_deref())?;
    let (mut featured, mut skipped, mut written) = (0usize, 0usize, 0usize);
    for page in args.source.pages()? {
        let page = page?;
        let Some(latest) = page.last() else { continue };
        if latest.quality_class != Some(QualityClass::FA) {
            skipped += 1;
            continue;
        }
        featured += 1;
        for s in extract_negative_sentences(latest, args.category)? {
            write_json_line(&mut out, &s)?;
            written += 1;
        }
    }
    out.flush()?;
    eprintln!("negatives: {featured} featured pages, {skipped} other pages skipped, {written} sentences");
    Ok(())
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[command(subcommand)]
    pub command: CorpusCommand,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Balance, split by page and export train/validation/test JSONL
    Build(BuildArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Positive sentences from `label` (`-` reads stdin)
    #[arg(long, value_name = "PATH")]
    pub positives: PathBuf,
    /// Negative sentences from `negatives`
    #[arg(long, value_name = "PATH")]
    pub negatives: PathBuf,
    #[arg(long)]
    pub category: Category,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn run(args: CorpusArgs) -> Result<()> {
    let CorpusCommand::Build(args) = args.command;
    let read = |path: &PathBuf, polarity: Polarity| -> Result<Vec<_>> {
        let all = read_sentences(open_read(path)?, &path.display().to_string())?;
        Ok(all
            .into_iter()
            .filter(|s| s.category == args.category && s.polarity == polarity)
            .collect())
    };
    let positives = read(&args.positives, Polarity::Positive)?;
    let negatives = read(&args.negatives, Polarity::Negative)?;
    let (split, stats) = build_splits(&positives, &negatives, args.seed)?;
    export_corpus(&split, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    serde_json::to_writer(std::io::stdout().lock(), &stats)?;
    println!();
    eprintln!(
        "corpus: {} train, {} validation, {} test written to {}",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        args.out.display()
    );
    Ok(())
}
