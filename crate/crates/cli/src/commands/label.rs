use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use sentqual_core::corpus::{extract_positive_sentences, ExtractOptions, ExtractStats, LabeledSentence};
use sentqual_core::reverts::{detect_reverts, RevertStatus};
use sentqual_core::{diff_pair, label_edit, Category, Mode, Revision, RuleVerdict};

use super::RevertArgs;
use crate::input::{open_write, write_json_line, RevisionSource};

/// Pages handed to the worker pool at a time. Fixed so that output never
/// depends on the number of workers.
pub const BATCH_PAGES: usize = 256;

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[command(flatten)]
    pub source: RevisionSource,
    /// Only emit this category
    #[arg(long)]
    pub category: Option<Category>,
    /// Detector set: `strict` uses the rule-table patterns verbatim
    #[arg(long, default_value = "default")]
    pub mode: Mode,
    /// Emit one verdict with its rule trace per edit instead of sentences
    #[arg(long)]
    pub explain: bool,
    /// Worker threads
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    #[command(flatten)]
    pub reverts: RevertArgs,
    /// Output file (default stdout)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Explained<'a> {
    revert_status: RevertStatus,
    #[serde(flatten)]
    verdict: &'a RuleVerdict,
}

enum PageOutput {
    Sentences(Vec<LabeledSentence>, ExtractStats),
    Verdicts(Vec<(RevertStatus, RuleVerdict)>),
}

fn explain_page(revs: &[Revision], options: &ExtractOptions) -> Result<Vec<(RevertStatus, RuleVerdict)>> {
    let statuses = detect_reverts(revs, &options.reverts)?;
    Ok((1..revs.len())
        .map(|i| (statuses[i], label_edit(&diff_pair(&revs[i - 1], &revs[i]), options.mode)))
        .collect())
}

fn process(revs: &[Revision], options: &ExtractOptions, explain: bool) -> Result<PageOutput> {
    if explain {
        return Ok(PageOutput::Verdicts(explain_page(revs, options)?));
    }
    let mut stats = ExtractStats::default();
    let sentences = extract_positive_sentences(revs, options, &mut stats)?;
    Ok(PageOutput::Sentences(sentences, stats))
}

pub fn run(args: LabelArgs) -> Result<()> {
    let options = ExtractOptions {
        mode: args.mode,
        reverts: args.reverts.config(),
        category: args.category,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(usize::from(args.jobs)).build()?;
    let mut out = open_write(args.out.as_deref())?;
    let mut pages = args.source.pages()?;
    let mut total = ExtractStats::default();
    let (mut page_count, mut emitted) = (0usize, 0usize);
    let mut pending_error = None;
    loop {
        let mut batch = Vec::with_capacity(BATCH_PAGES);
        for page in pages.by_ref() {
            match page {
                Ok(revs) => batch.push(revs),
                Err(e) => {
                    pending_error = Some(e);
                    break;
                }
            }
            if batch.len() == BATCH_PAGES {
                break;
            }
        }
        if batch.is_empty() {
            break;
        }
        page_count += batch.len();
        let results: Vec<Result<PageOutput>> =
            pool.install(|| batch.par_iter().map(|revs| process(revs, &options, args.explain)).collect());
        for result in results {
            match result? {
                PageOutput::Sentences(sentences, stats) => {
                    total.pairs += stats.pairs;
                    total.pairs_excluded_by_revert += stats.pairs_excluded_by_revert;
                    total.malformed_skipped += stats.malformed_skipped;
                    total.duplicates_dropped += stats.duplicates_dropped;
                    for s in &sentences {
                        write_json_line(&mut out, s)?;
                    }
                    emitted += sentences.len();
                }
                PageOutput::Verdicts(verdicts) => {
                    total.pairs += verdicts.len();
                    for (revert_status, verdict) in &verdicts {
                        write_json_line(&mut out, &Explained { revert_status: *revert_status, verdict })?;
                    }
                    emitted += verdicts.len();
                }
            }
        }
        if pending_error.is_some() {
            break;
        }
    }
    out.flush()?;
    if let Some(e) = pending_error {
        return Err(e);
    }
    log::info!(
        "{page_count} pages, {} pairs, {} excluded as reverts, {} skipped, {} duplicates",
        total.pairs,
        total.pairs_excluded_by_revert,
        total.malformed_skipped,
        total.duplicates_dropped
    );
    eprintln!(
        "label: {page_count} pages, {} edit pairs, {emitted} {} written",
        total.pairs,
        if args.explain { "verdicts" } else { "sentences" }
    );
    Ok(())
}
