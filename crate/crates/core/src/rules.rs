//! Rule-based intent labeling of edit diffs.
//!
//! Three independent classifiers inspect an [`EditDiff`]:
//!
//! * citation: a segment inserts citation markup that its deleted side lacks;
//! * point of view: a single changed line in a single paragraph, a comment
//!   mentioning POV, and no citation, template, link, infobox or multi-line
//!   change anywhere in the diff;
//! * clarification: a small in-sentence edit (at most 10 inserted and 5
//!   deleted words) on a line free of the same structural changes.
//!
//! The negative clauses look only at non-empty segment sides. The infobox
//! pattern matches the empty string, so applying it to the empty side of a
//! pure insertion or deletion would veto every such edit. A whole-line
//! insertion or deletion counts as a multi-line change.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diff::{align_sentences, ChangedSentence, EditDiff, LineChange, Segment, SentenceAlignment};
use crate::wikitext::{strip_markup, Mode, Patterns};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Citation,
    PointOfView,
    Clarification,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Citation, Category::PointOfView, Category::Clarification];

    /// Short name used on the command line and in logs.
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Citation => "citation",
            Category::PointOfView => "pov",
            Category::Clarification => "clarification",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "citation" => Ok(Category::Citation),
            "pov" | "point_of_view" | "pointofview" => Ok(Category::PointOfView),
            "clarification" => Ok(Category::Clarification),
            other => Err(format!("unknown category {other:?} (expected citation, pov or clarification)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DiffRef {
    pub page_id: u64,
    pub old_rev_id: u64,
    pub new_rev_id: u64,
}

impl DiffRef {
    pub fn of(diff: &EditDiff) -> DiffRef {
        DiffRef {
            page_id: diff.page_id,
            old_rev_id: diff.old_rev_id,
            new_rev_id: diff.new_rev_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositiveSentence {
    pub category: Category,
    /// Original sentence with markup stripped.
    pub text: String,
    pub sentence: ChangedSentence,
    pub section: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub rule: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleVerdict {
    pub diff_ref: DiffRef,
    pub labels: BTreeSet<Category>,
    pub positive_sentences: Vec<PositiveSentence>,
    pub trace: Vec<TraceEntry>,
}

impl RuleVerdict {
    pub fn has(&self, category: Category) -> bool {
        self.labels.contains(&category)
    }
}

/// Result of one classifier.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub fired: bool,
    pub sentences: Vec<PositiveSentence>,
    pub trace: Vec<TraceEntry>,
}

impl Outcome {
    fn check(&mut self, rule: impl Into<String>, passed: bool) -> bool {
        self.trace.push(TraceEntry {
            rule: rule.into(),
            passed,
        });
        passed
    }
}

/// Which structural changes a set of segments carries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Structure {
    citation: bool,
    template: bool,
    wikilink: bool,
    infobox: bool,
    multiline: bool,
}

impl Structure {
    fn of_line(line: &LineChange, patterns: &Patterns) -> Structure {
        let mut s = Structure {
            multiline: line.is_whole_line(),
            ..Structure::default()
        };
        for seg in &line.segments {
            for side in [&seg.inserted, &seg.deleted] {
                if side.is_empty() {
                    continue;
                }
                s.citation |= patterns.citation.is_match(side);
                s.template |= patterns.template.is_match(side);
                s.wikilink |= patterns.wikilink.is_match(side);
                s.infobox |= patterns.infobox.is_match(side);
                s.multiline |= patterns.multiline.is_match(side);
            }
        }
        s
    }

    fn union(self, other: Structure) -> Structure {
        Structure {
            citation: self.citation | other.citation,
            template: self.template | other.template,
            wikilink: self.wikilink | other.wikilink,
            infobox: self.infobox | other.infobox,
            multiline: self.multiline | other.multiline,
        }
    }

    /// Records each negative clause; true when none fired.
    fn record(self, outcome: &mut Outcome, prefix: &str) -> bool {
        let clauses = [
            ("is_citation_inserted_or_deleted", self.citation),
            ("is_template_inserted_or_deleted", self.template),
            ("is_wikilink_inserted_or_deleted", self.wikilink),
            ("is_infobox_inserted_or_deleted", self.infobox),
            ("is_multiline_inserted_or_deleted", self.multiline),
        ];
        let mut clean = true;
        for (name, hit) in clauses {
            clean &= outcome.check(format!("{prefix}NOT {name}"), !hit);
        }
        clean
    }
}

/// A segment whose change disappears once markup is stripped.
pub fn is_markup_only_segment(seg: &Segment) -> bool {
    strip_markup(&seg.inserted) == strip_markup(&seg.deleted)
}

/// Inserted citation markup that the deleted side does not already contain.
pub fn is_citation_added(seg: &Segment, mode: Mode) -> bool {
    let deleted = seg.deleted.to_lowercase();
    Patterns::for_mode(mode)
        .citation
        .find_iter(&seg.inserted)
        .any(|m| !deleted.contains(&m.as_str().to_lowercase()))
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn positive(category: Category, sentence: &ChangedSentence, line: &LineChange) -> PositiveSentence {
    PositiveSentence {
        category,
        text: strip_markup(&sentence.original),
        sentence: sentence.clone(),
        section: line.section.clone(),
    }
}

fn alignments(diff: &EditDiff) -> Vec<SentenceAlignment> {
    diff.lines.iter().enumerate().map(|(i, l)| align_sentences(l, i)).collect()
}

fn citation_with(diff: &EditDiff, aligned: &[SentenceAlignment], mode: Mode) -> Outcome {
    let mut out = Outcome::default();
    let added = diff.lines.iter().any(|l| l.segments.iter().any(|s| is_citation_added(s, mode)));
    out.fired = out.check("citation: is_citation_inserted", added);
    if out.fired {
        for (line, alignment) in diff.lines.iter().zip(aligned) {
            for sentence in &alignment.sentences {
                if sentence.segments.iter().any(|s| is_citation_added(s, mode)) {
                    out.sentences.push(positive(Category::Citation, sentence, line));
                }
            }
        }
    }
    out
}

fn pov_with(diff: &EditDiff, aligned: &[SentenceAlignment], mode: Mode) -> Outcome {
    let patterns = Patterns::for_mode(mode);
    let mut out = Outcome::default();
    let one_para = out.check("pov: para_changes == 1", diff.changed_paragraph_count == 1);
    let one_line = out.check("pov: single changed line", diff.lines.len() == 1);
    let comment = out.check("pov: comment_matches", patterns.pov_comment.is_match(&diff.comment));
    let structure = diff
        .lines
        .iter()
        .map(|l| Structure::of_line(l, patterns))
        .fold(Structure::default(), Structure::union);
    let clean = structure.record(&mut out, "pov: ");
    out.fired = one_para && one_line && comment && clean;
    if out.fired {
        for (line, alignment) in diff.lines.iter().zip(aligned) {
            for sentence in &alignment.sentences {
                if !sentence.segments.iter().all(is_markup_only_segment) {
                    out.sentences.push(positive(Category::PointOfView, sentence, line));
                }
            }
        }
    }
    out
}

/// Whether a segment is a small, non-markup edit.
fn clarifying_segment(seg: &Segment) -> bool {
    let ins = word_count(&seg.inserted);
    let del = word_count(&seg.deleted);
    ins <= 10 && del <= 5 && ins + del > 0 && !is_markup_only_segment(seg)
}

fn clarification_with(diff: &EditDiff, aligned: &[SentenceAlignment], mode: Mode) -> Outcome {
    let patterns = Patterns::for_mode(mode);
    let mut out = Outcome::default();
    for (i, (line, alignment)) in diff.lines.iter().zip(aligned).enumerate() {
        let prefix = format!("clarification[line {i}]: ");
        let in_sentence = out.check(format!("{prefix}inside existing sentence"), !alignment.sentences.is_empty());
        let clean = Structure::of_line(line, patterns).record(&mut out, &prefix);
        let mut qualifying = 0;
        for sentence in &alignment.sentences {
            if sentence.segments.iter().any(clarifying_segment) {
                qualifying += 1;
                if in_sentence && clean {
                    out.sentences.push(positive(Category::Clarification, sentence, line));
                }
            }
        }
        out.check(
            format!("{prefix}inserted_length_words in [0,10] AND deleted_length_words in [0,5]"),
            qualifying > 0,
        );
    }
    out.fired = !out.sentences.is_empty();
    out
}

pub fn classify_citation(diff: &EditDiff, mode: Mode) -> Outcome {
    citation_with(diff, &alignments(diff), mode)
}

pub fn classify_pov(diff: &EditDiff, mode: Mode) -> Outcome {
    pov_with(diff, &alignments(diff), mode)
}

pub fn classify_clarification(diff: &EditDiff, mode: Mode) -> Outcome {
    clarification_with(diff, &alignments(diff), mode)
}

/// Runs all three classifiers.
pub fn label_edit(diff: &EditDiff, mode: Mode) -> RuleVerdict {
    let aligned = alignments(diff);
    let mut verdict = RuleVerdict {
        diff_ref: DiffRef::of(diff),
        ..RuleVerdict::default()
    };
    let outcomes = [
        (Category::Citation, citation_with(diff, &aligned, mode)),
        (Category::PointOfView, pov_with(diff, &aligned, mode)),
        (Category::Clarification, clarification_with(diff, &aligned, mode)),
    ];
    for (category, outcome) in outcomes {
        if outcome.fired {
            verdict.labels.insert(category);
            verdict.positive_sentences.extend(outcome.sentences);
        }
        verdict.trace.extend(outcome.trace);
    }
    verdict
}
