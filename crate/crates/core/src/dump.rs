//! Streaming reader for MediaWiki XML export dumps (pages-meta-history layout).
//!
//! Only one page's revisions are held in memory at a time. Revisions are
//! emitted per page in `(timestamp, rev_id)` order. Any `<sha1>` carried by the
//! dump is checked against the text; the stored digest is always the lowercase
//! hex SHA-1 of the text (dumps carry base-36 digests, and some omit them).

use std::collections::VecDeque;
use std::io::BufRead;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::ParseError;
use crate::revision::{is_hex_sha1, sha1_hex, sort_revisions, timestamp_format, Revision};

/// Counters for records that were skipped or repaired while reading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DumpStats {
    pub pages: usize,
    pub revisions: usize,
    /// Revisions with no text (absent or `deleted`), skipped.
    pub skipped_missing_text: usize,
    /// Revisions lacking an id or timestamp, skipped.
    pub skipped_malformed: usize,
    /// Revisions without a hex `<sha1>` element; digest computed from text.
    pub sha1_recomputed: usize,
    /// Revisions whose hex `<sha1>` disagreed with the text.
    pub sha1_mismatch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    PageTitle,
    PageId,
    RevId,
    ParentId,
    Timestamp,
    Comment,
    Sha1,
    Text,
}

#[derive(Default)]
struct PartialRevision {
    id: Option<String>,
    parent: Option<String>,
    timestamp: Option<String>,
    comment: String,
    sha1: Option<String>,
    text: Option<String>,
    text_deleted: bool,
}

#[derive(Default)]
struct PartialPage {
    title: String,
    id: Option<String>,
    revisions: Vec<PartialRevision>,
}

/// Iterator over the revisions of a dump.
pub struct DumpReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    stack: Vec<Vec<u8>>,
    page: Option<PartialPage>,
    revision: Option<PartialRevision>,
    capture: Option<(Field, String)>,
    pending: VecDeque<Revision>,
    stats: DumpStats,
    finished: bool,
}

/// Parses a MediaWiki XML export from a byte stream.
pub fn parse_dump<R: BufRead>(input: R) -> DumpReader<R> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().trim_text(false);
    reader.config_mut().check_end_names = true;
    DumpReader {
        reader,
        buf: Vec::with_capacity(64 * 1024),
        stack: Vec::new(),
        page: None,
        revision: None,
        capture: None,
        pending: VecDeque::new(),
        stats: DumpStats::default(),
        finished: false,
    }
}

impl<R: BufRead> DumpReader<R> {
    pub fn stats(&self) -> &DumpStats {
        &self.stats
    }

    fn xml_error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Xml {
            offset: self.reader.buffer_position(),
            message: message.into(),
        }
    }

    fn field_for(&self, name: &[u8]) -> Option<Field> {
        let parent = self.stack.last().map(Vec::as_slice);
        match (parent, name) {
            (Some(b"page"), b"title") => Some(Field::PageTitle),
            (Some(b"page"), b"id") => Some(Field::PageId),
            (Some(b"revision"), b"id") => Some(Field::RevId),
            (Some(b"revision"), b"parentid") => Some(Field::ParentId),
            (Some(b"revision"), b"timestamp") => Some(Field::Timestamp),
            (Some(b"revision"), b"comment") => Some(Field::Comment),
            (Some(b"revision"), b"sha1") => Some(Field::Sha1),
            (Some(b"revision"), b"text") => Some(Field::Text),
            _ => None,
        }
    }

    fn open(&mut self, start: &BytesStart<'_>, empty: bool) -> Result<(), ParseError> {
        let name = start.local_name().as_ref().to_vec();
        match name.as_slice() {
            b"page" => self.page = Some(PartialPage::default()),
            b"revision" if self.page.is_some() => self.revision = Some(PartialRevision::default()),
            _ => {}
        }
        if let Some(field) = self.field_for(&name) {
            if field == Field::Text {
                let deleted = start
                    .attributes()
                    .flatten()
                    .any(|a| a.key.local_name().as_ref() == b"deleted");
                if let Some(rev) = self.revision.as_mut() {
                    rev.text_deleted = deleted;
                    if !deleted {
                        rev.text = Some(String::new());
                    }
                }
            }
            if empty {
                self.store(field, String::new());
            } else {
                self.capture = Some((field, String::new()));
            }
        }
        if !empty {
            self.stack.push(name);
        }
        Ok(())
    }

    fn store(&mut self, field: Field, value: String) {
        match field {
            Field::PageTitle => {
                if let Some(p) = self.page.as_mut() {
                    p.title = value;
                }
            }
            Field::PageId => {
                if let Some(p) = self.page.as_mut() {
                    p.id = Some(value);
                }
            }
            _ => {
                let Some(rev) = self.revision.as_mut() else { return };
                match field {
                    Field::RevId => rev.id = Some(value),
                    Field::ParentId => rev.parent = Some(value),
                    Field::Timestamp => rev.timestamp = Some(value),
                    Field::Comment => rev.comment = value,
                    Field::Sha1 => rev.sha1 = Some(value),
                    Field::Text => {
                        if !rev.text_deleted {
                            rev.text = Some(value)
                        }
                    }
                    Field::PageTitle | Field::PageId => unreachable!(),
                }
            }
        }
    }

    fn close(&mut self, name: &[u8]) -> Result<(), ParseError> {
        match self.stack.pop() {
            Some(open) if open == name => {}
            Some(open) => {
                return Err(self.xml_error(format!(
                    "expected </{}>, found </{}>",
                    String::from_utf8_lossy(&open),
                    String::from_utf8_lossy(name)
                )))
            }
            None => return Err(self.xml_error("unbalanced closing tag")),
        }
        if let Some((field, value)) = self.capture.take() {
            self.store(field, value);
        }
        match name {
            b"revision" => {
                if let (Some(rev), Some(page)) = (self.revision.take(), self.page.as_mut()) {
                    page.revisions.push(rev);
                }
            }
            b"page" => {
                if let Some(page) = self.page.take() {
                    self.finish_page(page)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn finish_page(&mut self, page: PartialPage) -> Result<(), ParseError> {
        let page_id = match page.id.as_deref().map(str::trim).map(str::parse::<u64>) {
            Some(Ok(id)) => id,
            _ => return Err(self.xml_error(format!("page {:?} lacks a numeric <id>", page.title))),
        };
        self.stats.pages += 1;
        let mut out = Vec::with_capacity(page.revisions.len());
        for rev in page.revisions {
            let Some(text) = rev.text else {
                self.stats.skipped_missing_text += 1;
                log::warn!("page {page_id}: revision {:?} has no text, skipped", rev.id);
                continue;
            };
            let rev_id = rev.id.as_deref().and_then(|s| s.trim().parse::<u64>().ok());
            let timestamp = rev
                .timestamp
                .as_deref()
                .and_then(|s| timestamp_format::parse(s).ok());
            let (Some(rev_id), Some(timestamp)) = (rev_id, timestamp) else {
                self.stats.skipped_malformed += 1;
                continue;
            };
            let parent_id = rev.parent.as_deref().and_then(|s| s.trim().parse::<u64>().ok());
            let digest = sha1_hex(&text);
            match rev.sha1.as_deref().map(str::trim) {
                Some(s) if is_hex_sha1(s) => {
                    if s != digest {
                        self.stats.sha1_mismatch += 1;
                    }
                }
                _ => self.stats.sha1_recomputed += 1,
            }
            out.push(Revision {
                rev_id,
                page_id,
                parent_id,
                timestamp,
                comment: rev.comment,
                sha1: digest,
                text,
                page_title: page.title.clone(),
                quality_class: None,
            });
        }
        sort_revisions(&mut out);
        self.stats.revisions += out.len();
        self.pending.extend(out);
        Ok(())
    }

    fn step(&mut self) -> Result<bool, ParseError> {
        self.buf.clear();
        let event = match self.reader.read_event_into(&mut self.buf) {
            Ok(ev) => ev.into_owned(),
            Err(e) => {
                return Err(ParseError::Xml {
                    offset: self.reader.error_position(),
                    message: e.to_string(),
                })
            }
        };
        match event {
            Event::Start(start) => self.open(&start, false)?,
            Event::Empty(start) => self.open(&start, true)?,
            Event::End(end) => self.close(end.local_name().as_ref())?,
            Event::Text(t) => {
                if let Some((_, value)) = self.capture.as_mut() {
                    let text = t.unescape().map_err(|e| ParseError::Xml {
                        offset: self.reader.buffer_position(),
                        message: e.to_string(),
                    })?;
                    value.push_str(&text);
                }
            }
            Event::CData(c) => {
                if let Some((_, value)) = self.capture.as_mut() {
                    value.push_str(&String::from_utf8_lossy(&c));
                }
            }
            Event::Eof => {
                if !self.stack.is_empty() {
                    return Err(self.xml_error("unexpected end of document"));
                }
                return Ok(false);
            }
            _ => {}
        }
        Ok(true)
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<Revision, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(rev) = self.pending.pop_front() {
                return Some(Ok(rev));
            }
            if self.finished {
                return None;
            }
            match self.step() {
                Ok(true) => {}
                Ok(false) => self.finished = true,
                Err(e) => {
                    self.finished = true;
                    return Some(Err(e));
                }
            }
        }
    }
}
