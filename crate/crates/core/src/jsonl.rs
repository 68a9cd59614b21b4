//! JSONL revision format: one `Revision` object per line.
//!
//! `sha1`, `comment`, `parent_id` and `quality_class` may be omitted on input.
//! Consecutive lines of the same page are buffered and emitted in
//! `(timestamp, rev_id)` order.

use std::collections::VecDeque;
use std::io::{self, BufRead, Write};

use chrono::{DateTime, Utc};
use serde::Deserialize;

use crate::error::ParseError;
use crate::revision::{sha1_hex, sort_revisions, timestamp_format, QualityClass, Revision};

#[derive(Deserialize)]
struct RawRevision {
    rev_id: u64,
    page_id: u64,
    #[serde(default)]
    parent_id: Option<u64>,
    #[serde(with = "timestamp_format")]
    timestamp: DateTime<Utc>,
    #[serde(default)]
    comment: String,
    #[serde(default)]
    sha1: Option<String>,
    text: String,
    #[serde(default)]
    page_title: String,
    #[serde(default)]
    quality_class: Option<QualityClass>,
}

impl From<RawRevision> for Revision {
    fn from(raw: RawRevision) -> Self {
        let sha1 = match raw.sha1 {
            Some(s) if !s.is_empty() => s.to_ascii_lowercase(),
            _ => sha1_hex(&raw.text),
        };
        Revision {
            rev_id: raw.rev_id,
            page_id: raw.page_id,
            parent_id: raw.parent_id,
            timestamp: raw.timestamp,
            comment: raw.comment,
            sha1,
            text: raw.text,
            page_title: raw.page_title,
            quality_class: raw.quality_class,
        }
    }
}

/// Parses one JSONL line.
pub fn parse_revision_line(line: &str, line_no: usize) -> Result<Revision, ParseError> {
    serde_json::from_str::<RawRevision>(line)
        .map(Revision::from)
        .map_err(|e| ParseError::Line {
            line: line_no,
            message: e.to_string(),
        })
}

/// Iterator over revisions read from JSONL.
pub struct JsonlReader<R: BufRead> {
    lines: std::iter::Enumerate<io::Lines<R>>,
    run: Vec<Revision>,
    ready: VecDeque<Revision>,
    error: Option<ParseError>,
    done: bool,
}

pub fn parse_jsonl<R: BufRead>(input: R) -> JsonlReader<R> {
    JsonlReader {
        lines: input.lines().enumerate(),
        run: Vec::new(),
        ready: VecDeque::new(),
        error: None,
        done: false,
    }
}

impl<R: BufRead> JsonlReader<R> {
    fn flush_run(&mut self) {
        sort_revisions(&mut self.run);
        self.ready.extend(self.run.drain(..));
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<Revision, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(rev) = self.ready.pop_front() {
                return Some(Ok(rev));
            }
            if let Some(err) = self.error.take() {
                return Some(Err(err));
            }
            if self.done {
                return None;
            }
            match self.lines.next() {
                None => {
                    self.done = true;
                    self.flush_run();
                }
                Some((idx, Err(e))) => {
                    self.done = true;
                    self.flush_run();
                    self.error = Some(ParseError::Line {
                        line: idx + 1,
                        message: e.to_string(),
                    });
                }
                Some((_, Ok(line))) if line.trim().is_empty() => {}
                Some((idx, Ok(line))) => match parse_revision_line(&line, idx + 1) {
                    Ok(rev) => {
                        if self.run.last().is_some_and(|last| last.page_id != rev.page_id) {
                            self.flush_run();
                        }
                        self.run.push(rev);
                    }
                    Err(e) => {
                        // revisions read before the bad line are still delivered
                        self.done = true;
                        self.flush_run();
                        self.error = Some(e);
                    }
                },
            }
        }
    }
}

/// Writes revisions as JSONL.
pub fn write_jsonl<'a, W: Write>(
    mut out: W,
    revs: impl IntoIterator<Item = &'a Revision>,
) -> io::Result<()> {
    for rev in revs {
        serde_json::to_writer(&mut out, rev)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Groups a page-ordered revision stream into one `Vec` per page.
pub struct PageGroups<I> {
    inner: I,
    carry: Option<Revision>,
    pending_error: Option<ParseError>,
}

pub fn group_pages<I>(revisions: I) -> PageGroups<I::IntoIter>
where
    I: IntoIterator<Item = Result<Revision, ParseError>>,
{
    PageGroups {
        inner: revisions.into_iter(),
        carry: None,
        pending_error: None,
    }
}

impl<I> Iterator for PageGroups<I>
where
    I: Iterator<Item = Result<Revision, ParseError>>,
{
    type Item = Result<Vec<Revision>, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.pending_error.take() {
            return Some(Err(e));
        }
        let mut page: Vec<Revision> = self.carry.take().into_iter().collect();
        loop {
            match self.inner.next() {
                None => return if page.is_empty() { None } else { Some(Ok(page)) },
                Some(Err(e)) => {
                    if page.is_empty() {
                        return Some(Err(e));
                    }
                    self.pending_error = Some(e);
                    return Some(Ok(page));
                }
                Some(Ok(rev)) => {
                    if page.first().is_some_and(|first| first.page_id != rev.page_id) {
                        self.carry = Some(rev);
                        return Some(Ok(page));
                    }
                    page.push(rev);
                }
            }
        }
    }
}
