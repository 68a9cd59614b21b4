//! Opening inputs and reading revision histories page by page.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};

use sentqual_core::dump::parse_dump;
use sentqual_core::jsonl::{group_pages, parse_jsonl};
use sentqual_core::revision::{apply_assessments, read_assessments};
use sentqual_core::{ParseError, Revision, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Xml,
}

/// Flags shared by every command that reads revision histories.
#[derive(Debug, Args)]
pub struct RevisionSource {
    /// Revision file (JSONL or MediaWiki XML); `-` reads stdin
    #[arg(long = "in", value_name = "PATH", conflicts_with = "store")]
    pub input: Option<PathBuf>,
    /// Read from a revision store directory instead
    #[arg(long, value_name = "DIR")]
    pub store: Option<PathBuf>,
    /// Input format; by default `.xml` files are dumps and everything else is JSONL
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSONL sidecar of {page_id, quality_class} applied to every revision
    #[arg(long, value_name = "PATH")]
    pub assessments: Option<PathBuf>,
}

pub type Pages = Box<dyn Iterator<Item = Result<Vec<Revision>>>>;

pub fn open_read(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
}

pub fn open_write(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p == Path::new("-") => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

pub fn read_revisions(reader: Box<dyn BufRead>, format: Format) -> Box<dyn Iterator<Item = Result<Revision, ParseError>>> {
    match format {
        Format::Jsonl => Box::new(parse_jsonl(reader)),
        Format::Xml => Box::new(parse_dump(reader)),
    }
}

pub fn format_of(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
            Format::Xml
        } else {
            Format::Jsonl
        }
    })
}

impl RevisionSource {
    /// Page histories in input order, each sorted by `(timestamp, rev_id)`.
    pub fn pages(&self) -> Result<Pages> {
        let classes = match &self.assessments {
            Some(p) => Some(read_assessments(open_read(p)?).with_context(|| format!("reading {}", p.display()))?),
            None => None,
        };
        let pages: Pages = match (&self.input, &self.store) {
            (Some(path), _) => {
                let name = path.display().to_string();
                let revs = read_revisions(open_read(path)?, format_of(path, self.format));
                Box::new(group_pages(revs).map(move |page| page.with_context(|| format!("reading {name}"))))
            }
            (None, Some(dir)) => {
                if !dir.is_dir() {
                    bail!("cannot open {}: not a directory", dir.display());
                }
                let store = Store::open(dir).with_context(|| format!("opening store {}", dir.display()))?;
                let ids = store.page_ids();
                Box::new(ids.into_iter().map(move |id| Ok(store.scan(id)?)))
            }
            (None, None) => bail!("give --in PATH or --store DIR"),
        };
        Ok(match classes {
            Some(classes) => Box::new(pages.map(move |page| {
                page.map(|mut revs| {
                    apply_assessments(&mut revs, &classes);
                    revs
                })
            })),
            None => pages,
        })
    }
}

/// Writes one JSON value per line.
pub fn write_json_line<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}
