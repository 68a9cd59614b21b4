use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use sentqual_core::fetch::{FetchConfig, WikiClient};
use sentqual_core::revision::{apply_assessments, read_assessments};
use sentqual_core::Store;

use crate::input::{format_of, open_read, read_revisions, Format};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Store directory, created if missing
    #[arg(long, value_name = "DIR")]
    pub store: PathBuf,
    /// Revision file (JSONL or MediaWiki XML); `-` reads stdin
    #[arg(long = "in", value_name = "PATH", conflicts_with = "fetch")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Page titles to download from the API
    #[arg(long, value_name = "TITLE", num_args = 1..)]
    pub fetch: Vec<String>,
    #[arg(long, default_value = "https://en.wikipedia.org/w/api.php")]
    pub api: String,
    /// Revisions per fetched page
    #[arg(long, default_value_t = 500)]
    pub limit: usize,
    /// Milliseconds between API requests
    #[arg(long, default_value_t = 500)]
    pub interval_ms: u64,
    /// JSONL sidecar of {page_id, quality_class}
    #[arg(long, value_name = "PATH")]
    pub assessments: Option<PathBuf>,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let store = Store::open(&args.store).with_context(|| format!("opening store {}", args.store.display()))?;
    let classes = match &args.assessments {
        Some(p) => Some(read_assessments(open_read(p)?).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    if let Some(path) = &args.input {
        let (mut read, mut added) = (0usize, 0usize);
        for rev in read_revisions(open_read(path)?, format_of(path, args.format)) {
            let mut rev = rev.with_context(|| format!("reading {}", path.display()))?;
            if let Some(classes) = &classes {
                apply_assessments(std::slice::from_mut(&mut rev), classes);
            }
            read += 1;
            if store.put(&rev)? {
                added += 1;
            }
        }
        eprintln!("ingest: {read} revisions read, {added} new, {} in store", store.len());
        return Ok(());
    }
    if args.fetch.is_empty() {
        bail!("give --in PATH or --fetch TITLE...");
    }
    let config = FetchConfig {
        min_interval: std::time::Duration::from_millis(args.interval_ms),
        ..FetchConfig::default()
    };
    let client = WikiClient::new(args.api.clone(), config)?;
    let report = client.fetch_revisions(&args.fetch, args.limit, &store);
    eprintln!("ingest: {} revisions fetched, {} new", report.fetched, report.stored);
    for (title, err) in &report.errors {
        eprintln!("error: {title}: {err}");
    }
    if !report.errors.is_empty() {
        bail!("{} of {} titles failed", report.errors.len(), args.fetch.len());
    }
    Ok(())
}
