//! The annotator-facing view of a diff.
//!
//! Only text content crosses this boundary. Edit comments, revision and page
//! ids, timestamps and editor names never appear, so annotators cannot see
//! the signals the rules use.

use serde::{Deserialize, Serialize};

use sentqual_core::{EditDiff, LineChange, Segment};

/// Keys a blinded payload must never contain, at any depth.
pub const FORBIDDEN_KEYS: &[&str] = &[
    "comment",
    "edit_comment",
    "author",
    "user",
    "username",
    "timestamp",
    "date",
    "page_id",
    "old_rev_id",
    "new_rev_id",
    "rev_id",
    "page_title",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindedSegment {
    pub inserted: String,
    pub deleted: String,
    pub old_offset: usize,
    pub new_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindedLine {
    pub old_line: String,
    pub new_line: String,
    pub segments: Vec<BlindedSegment>,
    pub context_before: String,
    pub context_after: String,
    pub section: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindedDiff {
    pub diff_id: String,
    pub lines: Vec<BlindedLine>,
}

impl From<&Segment> for BlindedSegment {
    fn from(s: &Segment) -> Self {
        BlindedSegment {
            inserted: s.inserted.clone(),
            deleted: s.deleted.clone(),
            old_offset: s.old_offset,
            new_offset: s.new_offset,
        }
    }
}

impl From<&LineChange> for BlindedLine {
    fn from(l: &LineChange) -> Self {
        BlindedLine {
            old_line: l.old_line.clone(),
            new_line: l.new_line.clone(),
            segments: l.segments.iter().map(BlindedSegment::from).collect(),
            context_before: l.context_before.clone(),
            context_after: l.context_after.clone(),
            section: l.section.clone(),
        }
    }
}

impl BlindedDiff {
    pub fn from_diff(diff_id: &str, diff: &EditDiff) -> BlindedDiff {
        BlindedDiff {
            diff_id: diff_id.to_string(),
            lines: diff.lines.iter().map(BlindedLine::from).collect(),
        }
    }
}

/// Paths of forbidden keys found anywhere in `value`.
pub fn forbidden_keys_in(value: &serde_json::Value) -> Vec<String> {
    fn walk(v: &serde_json::Value, path: &str, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, child) in map {
                    let here = format!("{path}/{k}");
                    if FORBIDDEN_KEYS.contains(&k.as_str()) {
                        out.push(here.clone());
                    }
                    walk(child, &here, out);
                }
            }
            serde_json::Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(child, &format!("{path}/{i}"), out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(value, "", &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use sentqual_core::diff::apply_segments;
    use sentqual_core::diff_revisions;

    #[test]
    fn blinding_drops_metadata() {
        let mut diff = diff_revisions("A b.", "A c.", "rv POV by Alice");
        diff.page_id = 9;
        diff.old_rev_id = 1;
        diff.new_rev_id = 2;
        let blinded = BlindedDiff::from_diff("d1", &diff);
        let json = serde_json::to_value(&blinded).unwrap();
        assert!(forbidden_keys_in(&json).is_empty());
        assert!(!json.to_string().contains("Alice"));
        assert_eq!(blinded.lines.len(), 1);
    }

    #[test]
    fn detector_finds_nested_keys() {
        let v = serde_json::json!({"a": [{"b": {"timestamp": 1}}], "comment": ""});
        assert_eq!(forbidden_keys_in(&v), vec!["/a/0/b/timestamp", "/comment"]);
    }

    #[test]
    fn practice_fixture_reconstructs() {
        let practice = crate::state::practice_diff();
        for line in &practice.lines {
            assert_eq!(apply_segments(&line.old_line, &line.segments), line.new_line);
        }
        let blinded = serde_json::to_value(BlindedDiff::from_diff("practice", practice)).unwrap();
        assert!(forbidden_keys_in(&blinded).is_empty());
    }
}
