//! Deterministic rule-based sentence splitter for wikitext.
//!
//! A sentence ends at `.`, `!` or `?` (plus any closing quotes or brackets and
//! directly attached `<ref>` or `{{...}}` markup) when followed by the end of
//! the text, or by whitespace and an upper-case letter or digit. Text inside
//! `<ref>...</ref>`, `{{...}}`, `[[...]]` and HTML comments never splits, and
//! a period after a known abbreviation or a single-letter initial never
//! splits.

use std::collections::HashSet;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

/// A sentence as a byte range of its source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Abbreviations that do not end a sentence, stored lowercase without the period.
#[derive(Debug, Clone, Default)]
pub struct Abbreviations(HashSet<String>);

const SHIPPED_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

impl Abbreviations {
    /// Parses the list format: one token per line, `#` comments, blank lines ignored.
    pub fn parse(list: &str) -> Abbreviations {
        Abbreviations(
            list.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.trim_end_matches('.').to_lowercase())
                .collect(),
        )
    }

    pub fn shipped() -> Abbreviations {
        Abbreviations::parse(SHIPPED_ABBREVIATIONS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.to_lowercase())
    }
}

pub struct SentenceSplitter {
    abbreviations: Abbreviations,
}

static DEFAULT_SPLITTER: LazyLock<SentenceSplitter> = LazyLock::new(|| SentenceSplitter {
    abbreviations: Abbreviations::shipped(),
});

/// Splits with the shipped abbreviation list.
pub fn split_sentences(text: &str) -> Vec<SentenceSpan> {
    DEFAULT_SPLITTER.split(text)
}

fn starts_with_ci(haystack: &str, at: usize, needle: &str) -> bool {
    haystack
        .as_bytes()
        .get(at..at + needle.len())
        .is_some_and(|s| s.eq_ignore_ascii_case(needle.as_bytes()))
}

fn find_ci(haystack: &str, from: usize, needle: &str) -> Option<usize> {
    let bytes = haystack.as_bytes();
    let n = needle.len();
    (from..=bytes.len().saturating_sub(n)).find(|&i| bytes[i..i + n].eq_ignore_ascii_case(needle.as_bytes()))
}

/// End of a protected region starting at `at`, if one starts there.
fn skip_protected(text: &str, at: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    if starts_with_ci(text, at, "<ref") {
        let next = bytes.get(at + 4).copied();
        if matches!(next, Some(b'>' | b'/' | b' ' | b'\t' | b'\n')) {
            let tag_end = text[at..].find('>').map(|p| at + p + 1).unwrap_or(text.len());
            if text[..tag_end].ends_with("/>") {
                return Some(tag_end);
            }
            return Some(match find_ci(text, tag_end, "</ref") {
                Some(close) => text[close..].find('>').map(|p| close + p + 1).unwrap_or(text.len()),
                None => text.len(),
            });
        }
    }
    if text[at..].starts_with("<!--") {
        return Some(text[at + 4..].find("-->").map(|p| at + 4 + p + 3).unwrap_or(text.len()));
    }
    for (open, close) in [("{{", "}}"), ("[[", "]]")] {
        if bytes[at..].starts_with(open.as_bytes()) {
            let mut depth = 0usize;
            let mut i = at;
            while i < bytes.len() {
                if bytes[i..].starts_with(open.as_bytes()) {
                    depth += 1;
                    i += 2;
                } else if bytes[i..].starts_with(close.as_bytes()) {
                    depth -= 1;
                    i += 2;
                    if depth == 0 {
                        return Some(i);
                    }
                } else {
                    i += 1;
                }
            }
            return Some(text.len());
        }
    }
    None
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}' | '\u{bb}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}' | '\u{ab}')
}

impl SentenceSplitter {
    pub fn new(abbreviations: Abbreviations) -> SentenceSplitter {
        SentenceSplitter { abbreviations }
    }

    fn word_before(text: &str, period: usize) -> &str {
        let start = text[..period]
            .char_indices()
            .rev()
            .take_while(|(_, c)| c.is_alphanumeric() || *c == '.')
            .last()
            .map_or(period, |(i, _)| i);
        &text[start..period]
    }

    fn is_abbreviation(&self, word: &str) -> bool {
        if word.is_empty() {
            return false;
        }
        let mut chars = word.chars();
        let first = chars.next().unwrap();
        if chars.next().is_none() && first.is_alphabetic() {
            return true;
        }
        self.abbreviations.contains(word)
    }

    /// Whether a sentence may start at byte `at` (after whitespace).
    fn starts_sentence(text: &str, at: usize) -> bool {
        let mut chars = text[at..].chars().skip_while(|&c| is_opener(c));
        chars.next().is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
    }

    pub fn split(&self, text: &str) -> Vec<SentenceSpan> {
        let mut spans = Vec::new();
        let len = text.len();
        let skip_ws = |mut i: usize| {
            while i < len {
                let c = text[i..].chars().next().unwrap();
                if !c.is_whitespace() {
                    break;
                }
                i += c.len_utf8();
            }
            i
        };
        let mut start = skip_ws(0);
        let mut i = start;
        while i < len {
            if let Some(end) = skip_protected(text, i) {
                i = end;
                continue;
            }
            let c = text[i..].chars().next().unwrap();
            if !matches!(c, '.' | '!' | '?') {
                i += c.len_utf8();
                continue;
            }
            let mut j = i + 1;
            loop {
                match text[j..].chars().next() {
                    Some(n) if matches!(n, '.' | '!' | '?') || is_closer(n) => j += n.len_utf8(),
                    Some(_) => match skip_protected(text, j) {
                        Some(end) if text[j..].starts_with("<ref") || text[j..].starts_with("{{") => j = end,
                        _ => break,
                    },
                    None => break,
                }
            }
            if c == '.' && self.is_abbreviation(Self::word_before(text, i)) {
                i = j;
                continue;
            }
            let next = skip_ws(j);
            if next == len {
                break;
            }
            if next > j && Self::starts_sentence(text, next) {
                spans.push(SentenceSpan {
                    start,
                    end: j,
                    text: text[start..j].to_string(),
                });
                start = next;
            }
            i = next.max(j);
        }
        if start < len {
            let end = text.trim_end().len();
            if end > start {
                spans.push(SentenceSpan {
                    start,
                    end,
                    text: text[start..end].to_string(),
                });
            }
        }
        spans
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        split_sentences(s).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn simple_pairs() {
        assert_eq!(texts("A cat. A dog."), vec!["A cat.", "A dog."]);
        assert_eq!(texts("One sentence only"), vec!["One sentence only"]);
        assert!(texts("").is_empty());
        assert!(texts("   \n ").is_empty());
    }

    #[test]
    fn abbreviation_protected() {
        assert_eq!(
            texts("Born in St. Louis. Died in 1900."),
            vec!["Born in St. Louis.", "Died in 1900."]
        );
        assert_eq!(texts("J. R. R. Tolkien wrote it. He was English."), vec![
            "J. R. R. Tolkien wrote it.",
            "He was English."
        ]);
        assert_eq!(texts("It grew, e.g. Rome. Yes."), vec!["It grew, e.g. Rome.", "Yes."]);
    }

    #[test]
    fn markup_is_protected_and_refs_attach() {
        assert_eq!(
            texts("Sales rose.<ref>A. Smith. Report. 2001.</ref> Then fell."),
            vec!["Sales rose.<ref>A. Smith. Report. 2001.</ref>", "Then fell."]
        );
        assert_eq!(
            texts("See {{lang|fr|Bonjour. Monde}} here. Next one!"),
            vec!["See {{lang|fr|Bonjour. Monde}} here.", "Next one!"]
        );
        assert_eq!(texts("He left. [[Paris]] stayed."), vec!["He left.", "[[Paris]] stayed."]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(texts("It was approx. ten. what now"), vec!["It was approx. ten. what now"]);
    }

    proptest::proptest! {
        #[test]
        fn spans_tile_source(s in "([A-Za-z]{1,6}|[ \\n]|[.!?]|\\[\\[|\\]\\]|\\{\\{|\\}\\}|<ref>|</ref>|St\\.|\"|é)*") {
            let spans = split_sentences(&s);
            let mut prev = 0;
            for span in &spans {
                proptest::prop_assert!(span.start < span.end);
                proptest::prop_assert!(prev <= span.start);
                proptest::prop_assert!(s[prev..span.start].chars().all(char::is_whitespace));
                proptest::prop_assert_eq!(&s[span.start..span.end], span.text.as_str());
                prev = span.end;
            }
            proptest::prop_assert!(s[prev..].chars().all(char::is_whitespace));
        }
    }
}
