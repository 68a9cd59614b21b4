//! Stored page versions and the quality-class sidecar.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::error::ParseError;

/// WP1.0 assessment scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QualityClass {
    Stub,
    Start,
    C,
    B,
    GA,
    FA,
    Unassessed,
}

impl FromStr for QualityClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "Stub" | "stub" => QualityClass::Stub,
            "Start" | "start" => QualityClass::Start,
            "C" | "c" => QualityClass::C,
            "B" | "b" => QualityClass::B,
            "GA" | "ga" => QualityClass::GA,
            "FA" | "fa" => QualityClass::FA,
            "Unassessed" | "unassessed" => QualityClass::Unassessed,
            other => return Err(format!("unknown quality class {other:?}")),
        })
    }
}

/// One stored version of a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub rev_id: u64,
    pub page_id: u64,
    /// `None` marks the page-creation revision.
    pub parent_id: Option<u64>,
    #[serde(with = "timestamp_format")]
    pub timestamp: DateTime<Utc>,
    pub comment: String,
    pub sha1: String,
    pub text: String,
    pub page_title: String,
    pub quality_class: Option<QualityClass>,
}

impl Revision {
    /// Builds a revision, computing `sha1` from `text`.
    pub fn new(
        rev_id: u64,
        page_id: u64,
        parent_id: Option<u64>,
        timestamp: DateTime<Utc>,
        comment: impl Into<String>,
        text: impl Into<String>,
        page_title: impl Into<String>,
    ) -> Self {
        let text = text.into();
        Revision {
            rev_id,
            page_id,
            parent_id,
            timestamp,
            comment: comment.into(),
            sha1: sha1_hex(&text),
            text,
            page_title: page_title.into(),
            quality_class: None,
        }
    }

    /// Ordering key within a page.
    pub fn order_key(&self) -> (DateTime<Utc>, u64) {
        (self.timestamp, self.rev_id)
    }

    pub fn digest_matches(&self) -> bool {
        self.sha1 == sha1_hex(&self.text)
    }
}

impl fmt::Display for Revision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{} ({})", self.page_title, self.rev_id, self.timestamp.to_rfc3339())
    }
}

/// Lowercase hex SHA-1 of the text bytes.
pub fn sha1_hex(text: &str) -> String {
    let digest = Sha1::digest(text.as_bytes());
    let mut out = String::with_capacity(40);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub(crate) fn is_hex_sha1(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Sorts revisions by `(timestamp, rev_id)`.
pub fn sort_revisions(revs: &mut [Revision]) {
    revs.sort_by_key(|r| r.order_key());
}

/// Timestamps travel as RFC 3339 at second precision (`2020-01-02T03:04:05Z`).
pub mod timestamp_format {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(serde::de::Error::custom)
    }

    pub fn parse(raw: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        DateTime::parse_from_rfc3339(raw.trim()).map(|t| t.with_timezone(&Utc))
    }
}

#[derive(Deserialize)]
struct AssessmentLine {
    page_id: u64,
    quality_class: String,
}

/// Reads the page-assessment sidecar: JSONL of `{page_id, quality_class}`.
pub fn read_assessments<R: BufRead>(reader: R) -> Result<HashMap<u64, QualityClass>, ParseError> {
    let mut out = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ParseError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: AssessmentLine = serde_json::from_str(&line).map_err(|e| ParseError::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        let class = parsed
            .quality_class
            .parse()
            .map_err(|message| ParseError::Line { line: line_no, message })?;
        out.insert(parsed.page_id, class);
    }
    Ok(out)
}

/// Attaches sidecar classes to revisions; pages absent from the sidecar keep their value.
pub fn apply_assessments(revs: &mut [Revision], classes: &HashMap<u64, QualityClass>) {
    for rev in revs {
        if let Some(class) = classes.get(&rev.page_id) {
            rev.quality_class = Some(*class);
        }
    }
}
