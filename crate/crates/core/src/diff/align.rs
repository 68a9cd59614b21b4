use serde::{Deserialize, Serialize};

use super::{LineChange, Segment};
use crate::wikitext::{split_sentences, SentenceSpan};

/// A pre-edit sentence together with its post-edit form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangedSentence {
    pub original: String,
    pub revised: String,
    pub segments: Vec<Segment>,
    /// Index of the owning [`LineChange`] in its diff.
    pub line_ref: usize,
    /// Byte span of `original` within the old line.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceAlignment {
    pub sentences: Vec<ChangedSentence>,
    /// Insertions that add one or more complete sentences.
    pub new_sentences: Vec<Segment>,
    /// Segments touching no old sentence, e.g. whitespace between sentences.
    pub unattached: Vec<Segment>,
}

/// Position in the new line corresponding to old position `x`, taken as a start.
fn map_start(segments: &[Segment], x: usize) -> usize {
    let mut delta: isize = 0;
    for s in segments {
        if (s.old_offset <= x && x < s.old_end()) || (s.old_offset == x && s.deleted.is_empty()) {
            return s.new_offset;
        }
        if s.old_end() <= x {
            delta += s.inserted.len() as isize - s.deleted.len() as isize;
        }
    }
    (x as isize + delta) as usize
}

/// Position in the new line corresponding to old position `x`, taken as an end.
fn map_end(segments: &[Segment], x: usize) -> usize {
    let mut delta: isize = 0;
    for s in segments {
        if (s.old_offset < x && x <= s.old_end()) || (s.old_offset == x && s.deleted.is_empty()) {
            return s.new_end();
        }
        if s.old_end() <= x {
            delta += s.inserted.len() as isize - s.deleted.len() as isize;
        }
    }
    (x as isize + delta) as usize
}

fn trimmed_range(text: &str, start: usize, end: usize) -> (usize, usize) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    (start + lead, (end - trail).max(start + lead))
}

/// True when the insertion is exactly one or more whole sentences of the new line.
fn adds_whole_sentences(seg: &Segment, new_line: &str, new_spans: &[SentenceSpan]) -> bool {
    let (a, b) = trimmed_range(new_line, seg.new_offset, seg.new_end());
    if a >= b {
        return false;
    }
    let starts = new_spans.iter().any(|s| s.start == a);
    let ends = new_spans.iter().any(|s| s.end == b);
    let straddles = new_spans
        .iter()
        .any(|s| s.start < b && a < s.end && (s.start < a || s.end > b));
    starts && ends && !straddles
}

/// Attaches the segments of `line` to the sentences of its old line.
///
/// Deletions and replacements attach to every old sentence they overlap. A
/// point insertion attaches to the sentence containing it or ending at it;
/// between sentences it attaches to the preceding one. Insertions of complete new sentences are
/// reported separately and never attached.
pub fn align_sentences(line: &LineChange, line_ref: usize) -> SentenceAlignment {
    let old_spans = split_sentences(&line.old_line);
    let new_spans = split_sentences(&line.new_line);
    let mut attached: Vec<Vec<usize>> = vec![Vec::new(); old_spans.len()];
    let mut out = SentenceAlignment::default();

    for (k, seg) in line.segments.iter().enumerate() {
        if seg.is_pure_insertion() {
            if adds_whole_sentences(seg, &line.new_line, &new_spans) {
                out.new_sentences.push(seg.clone());
                continue;
            }
            let p = seg.old_offset;
            // text ending in whitespace inserted at a sentence start sits in the gap before it
            let leans_back = seg.inserted.ends_with(char::is_whitespace);
            let target = old_spans
                .iter()
                .position(|s| s.start < p && p < s.end)
                .or_else(|| old_spans.iter().position(|s| s.end == p))
                .or_else(|| {
                    let t = old_spans.iter().position(|s| s.start == p)?;
                    Some(if leans_back && t > 0 { t - 1 } else { t })
                })
                .or_else(|| old_spans.iter().rposition(|s| s.end < p))
                .or(if old_spans.is_empty() { None } else { Some(0) });
            match target {
                Some(t) => attached[t].push(k),
                None => out.unattached.push(seg.clone()),
            }
        } else {
            let (a, b) = (seg.old_offset, seg.old_end());
            let mut hit = false;
            for (t, s) in old_spans.iter().enumerate() {
                if a < s.end && s.start < b {
                    attached[t].push(k);
                    hit = true;
                }
            }
            if !hit {
                out.unattached.push(seg.clone());
            }
        }
    }

    for (span, segs) in old_spans.iter().zip(attached) {
        if segs.is_empty() {
            continue;
        }
        let mut start = map_start(&line.segments, span.start);
        let mut end = map_end(&line.segments, span.end);
        for &k in &segs {
            let seg = &line.segments[k];
            start = start.min(seg.new_offset);
            end = end.max(seg.new_end());
        }
        let revised = line.new_line.get(start..end).unwrap_or("").trim().to_string();
        out.sentences.push(ChangedSentence {
            original: span.text.clone(),
            revised,
            segments: segs.iter().map(|&k| line.segments[k].clone()).collect(),
            line_ref,
            start: span.start,
            end: span.end,
        });
    }
    out
}
