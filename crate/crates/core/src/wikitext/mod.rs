//! Wikitext markup detection, stripping, sentence segmentation and section titles.
//!
//! Detectors come in two modes. [`Mode::Strict`] compiles the rule table's
//! literal patterns; [`Mode::Default`] broadens citation matching to
//! `<ref ...>` with attributes and case-insensitive `{{cite ...}}`, and allows
//! `_` in infobox parameter keys.
//!
//! The printed wikilink pattern in the rule table is syntactically garbled;
//! both modes read it as doubled brackets around a non-bracket interior
//! (`\[\[[^\[]+\]\]`). Whether the infobox pattern is anchored at the start of
//! the segment is ambiguous; both modes search unanchored.

mod sentences;
mod strip;

use std::sync::LazyLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

pub use sentences::{split_sentences, Abbreviations, SentenceSpan, SentenceSplitter};
pub use strip::strip_markup;

/// Rule-table literal for `is_citation_inserted`.
pub const STRICT_CITATION: &str = r"<ref>|\{\{Cite\}\}";
/// Rule-table literal for `is_template_inserted_or_deleted`.
pub const STRICT_TEMPLATE: &str = r"\{\{[^\{]+\}\}";
/// Reading of the garbled `is_wikilink_inserted_or_deleted` pattern.
pub const STRICT_WIKILINK: &str = r"\[\[[^\[]+\]\]";
/// Rule-table literal for `is_infobox_inserted_or_deleted`.
pub const STRICT_INFOBOX: &str = r"^$|[a-zA-Z0-9 ]+=";
/// Rule-table literal for `is_multiline_inserted_or_deleted`.
pub const STRICT_MULTILINE: &str = r"\n";
/// Rule-table literal for `comment_matches`, compiled case-insensitively.
pub const STRICT_POV_COMMENT: &str = "pov|pointy";

pub const DEFAULT_CITATION: &str = r"(?i)<ref(?:\s[^>]*)?>|\{\{\s*cite";
pub const DEFAULT_INFOBOX: &str = r"^$|[A-Za-z0-9_ ]+=";
pub const DEFAULT_POV_COMMENT: &str = r"(?i)\b(?:pov|pointy)\b";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Strict,
    #[default]
    Default,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Mode::Strict),
            "default" => Ok(Mode::Default),
            other => Err(format!("unknown rule mode {other:?} (expected strict or default)")),
        }
    }
}

/// Compiled detector set for one mode.
#[derive(Debug)]
pub struct Patterns {
    pub citation: Regex,
    pub template: Regex,
    pub wikilink: Regex,
    pub infobox: Regex,
    pub multiline: Regex,
    pub pov_comment: Regex,
}

static STRICT: LazyLock<Patterns> = LazyLock::new(|| Patterns {
    citation: Regex::new(STRICT_CITATION).unwrap(),
    template: Regex::new(STRICT_TEMPLATE).unwrap(),
    wikilink: Regex::new(STRICT_WIKILINK).unwrap(),
    infobox: Regex::new(STRICT_INFOBOX).unwrap(),
    multiline: Regex::new(STRICT_MULTILINE).unwrap(),
    pov_comment: RegexBuilder::new(STRICT_POV_COMMENT)
        .case_insensitive(true)
        .build()
        .unwrap(),
});

static DEFAULT: LazyLock<Patterns> = LazyLock::new(|| Patterns {
    citation: Regex::new(DEFAULT_CITATION).unwrap(),
    template: Regex::new(STRICT_TEMPLATE).unwrap(),
    wikilink: Regex::new(STRICT_WIKILINK).unwrap(),
    infobox: Regex::new(DEFAULT_INFOBOX).unwrap(),
    multiline: Regex::new(STRICT_MULTILINE).unwrap(),
    pov_comment: Regex::new(DEFAULT_POV_COMMENT).unwrap(),
});

impl Patterns {
    pub fn for_mode(mode: Mode) -> &'static Patterns {
        match mode {
            Mode::Strict => &STRICT,
            Mode::Default => &DEFAULT,
        }
    }
}

pub fn detect_citation(text: &str, mode: Mode) -> bool {
    Patterns::for_mode(mode).citation.is_match(text)
}

pub fn detect_template(text: &str, mode: Mode) -> bool {
    Patterns::for_mode(mode).template.is_match(text)
}

pub fn detect_wikilink(text: &str, mode: Mode) -> bool {
    Patterns::for_mode(mode).wikilink.is_match(text)
}

/// True for empty text or any `key =` run. Overmatches prose such as
/// `"He scored 3 = a record"`.
pub fn detect_infobox_param(text: &str, mode: Mode) -> bool {
    Patterns::for_mode(mode).infobox.is_match(text)
}

pub fn is_multiline(text: &str) -> bool {
    STRICT.multiline.is_match(text)
}

pub fn comment_matches_pov(comment: &str, mode: Mode) -> bool {
    Patterns::for_mode(mode).pov_comment.is_match(comment)
}

static REF_SPAN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<ref[^>]*/>|<ref(?:\s[^>]*)?>.*?</ref\s*>").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?[A-Za-z][^<>]*>").unwrap());
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\w").unwrap());

/// True when removing citations, templates and link brackets leaves no word
/// characters. Link labels count as content.
pub fn is_markup_only(text: &str) -> bool {
    let no_refs = REF_SPAN.replace_all(text, " ");
    let no_templates = strip::remove_balanced(&no_refs, "{{", "}}");
    let links = strip::unwrap_links(&no_templates);
    let no_tags = TAG.replace_all(&links, " ");
    !WORD.is_match(&no_tags)
}

/// Database form of a section title: trimmed, spaces to underscores, first
/// character upper-cased.
pub fn normalize_section_title(title: &str) -> String {
    let underscored = title.trim().replace(' ', "_");
    let mut chars = underscored.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

static HEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(={2,6})\s*(.*?)\s*(={2,6})\s*$").unwrap());

/// Title of a `== Heading ==` line, if the line is one.
pub fn heading_title(line: &str) -> Option<&str> {
    let caps = HEADING.captures(line)?;
    if caps[1].len() != caps[3].len() {
        return None;
    }
    caps.get(2).map(|m| m.as_str()).filter(|t| !t.is_empty())
}

/// Section name used for text before the first heading.
pub const LEAD_SECTION: &str = "Lead";
