use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;

use sentqual_core::eval::{opaque_diff_id, stratified_sample, PoolEntry, Quotas, SampleEntry, StudySample};
use sentqual_core::reverts::detect_reverts;
use sentqual_core::{diff_pair, label_edit, EditDiff, Mode};

use super::RevertArgs;
use crate::input::{open_write, RevisionSource};

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: RevisionSource,
    #[arg(long, default_value = "default")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Diffs drawn from those labeled point-of-view
    #[arg(long, default_value_t = 100)]
    pub pov: usize,
    /// Diffs drawn from those labeled clarification
    #[arg(long, default_value_t = 100)]
    pub clarification: usize,
    /// Diffs drawn from everything left
    #[arg(long, default_value_t = 800)]
    pub remainder: usize,
    /// Top up short strata from the remainder instead of failing
    #[arg(long)]
    pub backfill: bool,
    #[command(flatten)]
    pub reverts: RevertArgs,
    /// Output file (default stdout)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

pub fn run(args: SampleArgs) -> Result<()> {
    let reverts = args.reverts.config();
    let mut pool = Vec::new();
    let mut diffs: HashMap<String, EditDiff> = HashMap::new();
    for page in args.source.pages()? {
        let revs = page?;
        let statuses = detect_reverts(&revs, &reverts)?;
        for i in 1..revs.len() {
            if reverts.excludes(statuses[i]) || !revs[i - 1].digest_matches() || !revs[i].digest_matches() {
                continue;
            }
            let diff = diff_pair(&revs[i - 1], &revs[i]);
            if diff.lines.is_empty() {
                continue;
            }
            let id = opaque_diff_id(&diff);
            if diffs.contains_key(&id) {
                continue;
            }
            pool.push(PoolEntry {
                diff_id: id.clone(),
                labels: label_edit(&diff, args.mode).labels,
            });
            diffs.insert(id, diff);
        }
    }
    if pool.is_empty() {
        bail!("no edit diffs in the input");
    }
    let quotas = Quotas {
        point_of_view: args.pov,
        clarification: args.clarification,
        remainder: args.remainder,
    };
    let picked = stratified_sample(&pool, quotas, args.seed, args.backfill)?;
    let labels: HashMap<&str, &PoolEntry> = pool.iter().map(|e| (e.diff_id.as_str(), e)).collect();
    let sample = StudySample {
        seed: args.seed,
        diffs: picked
            .iter()
            .map(|p| SampleEntry {
                diff_id: p.diff_id.clone(),
                stratum: p.stratum,
                labels: labels[p.diff_id.as_str()].labels.clone(),
                diff: diffs[&p.diff_id].clone(),
            })
            .collect(),
    };
    let mut out = open_write(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &sample)?;
    writeln!(out)?;
    out.flush()?;
    eprintln!("sample: {} diffs drawn from a pool of {}", sample.diffs.len(), pool.len());
    Ok(())
}
