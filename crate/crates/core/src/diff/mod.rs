//! Line- and token-level decomposition of a revision pair.
//!
//! Lines (split on `\n`) are aligned by longest common subsequence. Inside each
//! run of unaligned lines, non-blank old lines are paired with non-blank new
//! lines by position; leftovers become whole-line deletions or insertions.
//! Each paired line is diffed over whitespace-delimited tokens, and every gap
//! between two consecutive common tokens yields at most one [`Segment`].

mod align;
mod lcs;

use serde::{Deserialize, Serialize};

use crate::revision::Revision;
use crate::wikitext::{heading_title, LEAD_SECTION};

pub use align::{align_sentences, ChangedSentence, SentenceAlignment};

/// One contiguous changed run within a line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub inserted: String,
    pub deleted: String,
    /// Byte offset of `deleted` in the old line.
    pub old_offset: usize,
    /// Byte offset of `inserted` in the new line.
    pub new_offset: usize,
}

impl Segment {
    pub fn is_pure_insertion(&self) -> bool {
        self.deleted.is_empty()
    }

    pub fn is_pure_deletion(&self) -> bool {
        self.inserted.is_empty()
    }

    pub fn old_end(&self) -> usize {
        self.old_offset + self.deleted.len()
    }

    pub fn new_end(&self) -> usize {
        self.new_offset + self.inserted.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineChange {
    /// Empty for an inserted line.
    pub old_line: String,
    /// Empty for a deleted line.
    pub new_line: String,
    pub segments: Vec<Segment>,
    pub paragraph_index: usize,
    pub context_before: String,
    pub context_after: String,
    /// Section heading in effect at this line.
    #[serde(default)]
    pub section: String,
}

impl LineChange {
    /// The whole line was added or removed.
    pub fn is_whole_line(&self) -> bool {
        self.old_line.is_empty() != self.new_line.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditDiff {
    #[serde(default)]
    pub page_id: u64,
    #[serde(default)]
    pub old_rev_id: u64,
    #[serde(default)]
    pub new_rev_id: u64,
    pub comment: String,
    pub lines: Vec<LineChange>,
    pub changed_paragraph_count: usize,
}

/// Applies the segments of a line to `old_line`.
pub fn apply_segments(old_line: &str, segments: &[Segment]) -> String {
    let mut out = String::with_capacity(old_line.len());
    let mut pos = 0;
    for seg in segments {
        out.push_str(&old_line[pos..seg.old_offset]);
        out.push_str(&seg.inserted);
        pos = seg.old_end();
    }
    out.push_str(&old_line[pos..]);
    out
}

/// Byte ranges of maximal non-whitespace runs.
fn tokenize(line: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, line.len()));
    }
    out
}

fn common_ws_prefix(a: &str, b: &str) -> usize {
    a.char_indices()
        .zip(b.chars())
        .take_while(|((_, x), y)| x == y && x.is_whitespace())
        .last()
        .map_or(0, |((i, x), _)| i + x.len_utf8())
}

fn common_ws_suffix(a: &str, b: &str, limit: usize) -> usize {
    let mut n = 0;
    for (x, y) in a.chars().rev().zip(b.chars().rev()) {
        if x != y || !x.is_whitespace() || n + x.len_utf8() > limit {
            break;
        }
        n += x.len_utf8();
    }
    n
}

/// Token-level segments turning `old` into `new`.
pub fn diff_line(old: &str, new: &str) -> Vec<Segment> {
    let old_tokens = tokenize(old);
    let new_tokens = tokenize(new);
    let old_words: Vec<&str> = old_tokens.iter().map(|&(s, e)| &old[s..e]).collect();
    let new_words: Vec<&str> = new_tokens.iter().map(|&(s, e)| &new[s..e]).collect();
    let anchors = lcs::lcs_pairs(&old_words, &new_words);

    let mut segments = Vec::new();
    let (mut old_pos, mut new_pos) = (0, 0);
    let bounds = anchors
        .iter()
        .map(|&(i, j)| (old_tokens[i], new_tokens[j]))
        .chain(std::iter::once(((old.len(), old.len()), (new.len(), new.len()))));
    for ((old_start, old_end), (new_start, new_end)) in bounds {
        let old_gap = &old[old_pos..old_start];
        let new_gap = &new[new_pos..new_start];
        if old_gap != new_gap {
            let lead = common_ws_prefix(old_gap, new_gap);
            let limit = old_gap.len().min(new_gap.len()) - lead;
            let trail = common_ws_suffix(old_gap, new_gap, limit);
            segments.push(Segment {
                deleted: old_gap[lead..old_gap.len() - trail].to_string(),
                inserted: new_gap[lead..new_gap.len() - trail].to_string(),
                old_offset: old_pos + lead,
                new_offset: new_pos + lead,
            });
        }
        old_pos = old_end;
        new_pos = new_end;
    }
    segments
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

/// Paragraph number of every line; blank lines separate paragraphs.
fn paragraph_numbers(lines: &[&str]) -> Vec<usize> {
    let mut out = Vec::with_capacity(lines.len());
    let mut para = 0;
    let mut seen_text = false;
    let mut after_blank = false;
    for line in lines {
        if is_blank(line) {
            after_blank = true;
        } else {
            if seen_text && after_blank {
                para += 1;
            }
            seen_text = true;
            after_blank = false;
        }
        out.push(para);
    }
    out
}

fn section_names(lines: &[&str]) -> Vec<String> {
    let mut current = LEAD_SECTION.to_string();
    lines
        .iter()
        .map(|line| {
            if let Some(title) = heading_title(line) {
                current = title.to_string();
            }
            current.clone()
        })
        .collect()
}

/// Number of distinct paragraphs touched by the diff.
pub fn count_changed_paragraphs(diff: &EditDiff) -> usize {
    let mut seen: Vec<usize> = diff.lines.iter().map(|l| l.paragraph_index).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

pub fn diff_revisions(old_text: &str, new_text: &str, comment: &str) -> EditDiff {
    let old_lines: Vec<&str> = old_text.split('\n').collect();
    let new_lines: Vec<&str> = new_text.split('\n').collect();
    let anchors = lcs::lcs_pairs(&old_lines, &new_lines);
    let old_paras = paragraph_numbers(&old_lines);
    let new_paras = paragraph_numbers(&new_lines);
    let old_sections = section_names(&old_lines);
    let new_sections = section_names(&new_lines);
    let mut unchanged = vec![false; old_lines.len()];
    for &(i, _) in &anchors {
        unchanged[i] = true;
    }

    let context = |from: usize, step: isize| -> String {
        let mut i = from as isize;
        while i >= 0 && (i as usize) < old_lines.len() && unchanged[i as usize] {
            if !is_blank(old_lines[i as usize]) {
                return old_lines[i as usize].to_string();
            }
            i += step;
        }
        String::new()
    };

    let mut lines = Vec::new();
    let (mut oi, mut ni) = (0usize, 0usize);
    let ends = anchors
        .iter()
        .copied()
        .chain(std::iter::once((old_lines.len(), new_lines.len())));
    for (oa, na) in ends {
        if oi < oa || ni < na {
            let before = if oi == 0 { String::new() } else { context(oi - 1, -1) };
            let after = context(oa, 1);
            let olds: Vec<usize> = (oi..oa).filter(|&i| !is_blank(old_lines[i])).collect();
            let news: Vec<usize> = (ni..na).filter(|&j| !is_blank(new_lines[j])).collect();
            for k in 0..olds.len().max(news.len()) {
                let (old_line, new_line, para, section) = match (olds.get(k), news.get(k)) {
                    (Some(&i), Some(&j)) => (old_lines[i], new_lines[j], old_paras[i], &old_sections[i]),
                    (Some(&i), None) => (old_lines[i], "", old_paras[i], &old_sections[i]),
                    (None, Some(&j)) => ("", new_lines[j], new_paras[j], &new_sections[j]),
                    (None, None) => unreachable!(),
                };
                let segments = diff_line(old_line, new_line);
                if segments.is_empty() {
                    continue;
                }
                lines.push(LineChange {
                    old_line: old_line.to_string(),
                    new_line: new_line.to_string(),
                    segments,
                    paragraph_index: para,
                    context_before: before.clone(),
                    context_after: after.clone(),
                    section: section.clone(),
                });
            }
        }
        oi = oa + 1;
        ni = na + 1;
    }

    let mut diff = EditDiff {
        comment: comment.to_string(),
        lines,
        ..EditDiff::default()
    };
    diff.changed_paragraph_count = count_changed_paragraphs(&diff);
    diff
}

/// Diff between two revisions of one page, carrying their ids and the new comment.
pub fn diff_pair(old: &Revision, new: &Revision) -> EditDiff {
    let mut diff = diff_revisions(&old.text, &new.text, &new.comment);
    diff.page_id = new.page_id;
    diff.old_rev_id = old.rev_id;
    diff.new_rev_id = new.rev_id;
    diff
}
