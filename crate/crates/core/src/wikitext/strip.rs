use std::borrow::Cow;
use std::sync::LazyLock;

use regex::Regex;

static COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->").unwrap());
static REF_SELF_CLOSING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<ref(?:\s[^<>]*)?/>").unwrap());
static REF_PAIR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<ref(?:\s[^<>]*)?>.*?</ref\s*>").unwrap());
static NAMESPACED_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\[\[\s*(?:category|file|image)\s*:[^\[\]]*\]\]").unwrap());
static PIPED_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\[[^\[\]]*\|([^\[\]|]*)\]\]").unwrap());
static PLAIN_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\[([^\[\]|]*)\]\]").unwrap());
static EXTERNAL_LABELED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[(?:https?:)?//[^\s\[\]]+\s+([^\[\]]*)\]").unwrap());
static EXTERNAL_BARE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(?:https?:)?//[^\s\[\]]+\]").unwrap());
static QUOTES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"''+").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?[A-Za-z][^<>]*>").unwrap());
static SPACES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());
static SPACE_BEFORE_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r" ([.,;:!?])").unwrap());

/// Removes balanced `open ... close` regions, nesting included. Unbalanced
/// delimiters are left in place.
pub(crate) fn remove_balanced<'a>(text: &'a str, open: &str, close: &str) -> Cow<'a, str> {
    if !text.contains(open) {
        return Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    let mut region_start = 0usize;
    let mut i = 0usize;
    let bytes = text.as_bytes();
    while i < bytes.len() {
        if text[i..].starts_with(open) {
            if depth == 0 {
                region_start = i;
            }
            depth += 1;
            i += open.len();
        } else if depth > 0 && text[i..].starts_with(close) {
            depth -= 1;
            i += close.len();
        } else {
            let ch_len = text[i..].chars().next().map_or(1, char::len_utf8);
            if depth == 0 {
                out.push_str(&text[i..i + ch_len]);
            }
            i += ch_len;
        }
    }
    if depth > 0 {
        // unclosed region: keep it verbatim
        out.push_str(&text[region_start..]);
    }
    Cow::Owned(out)
}

/// Replaces `[[target|label]]` by `label` and `[[target]]` by `target`,
/// innermost first; category and file links are dropped.
pub(crate) fn unwrap_links(text: &str) -> Cow<'_, str> {
    let mut current = Cow::Borrowed(text);
    loop {
        let a = NAMESPACED_LINK.replace_all(&current, "");
        let b = PIPED_LINK.replace_all(&a, "$1");
        let c = PLAIN_LINK.replace_all(&b, "$1");
        if c == current {
            return current;
        }
        current = Cow::Owned(c.into_owned());
    }
}

fn strip_once(text: &str) -> String {
    let s = COMMENT.replace_all(text, "");
    let s = REF_SELF_CLOSING.replace_all(&s, "");
    let s = REF_PAIR.replace_all(&s, "");
    let s = remove_balanced(&s, "{{", "}}");
    let s = remove_balanced(&s, "{|", "|}");
    let s = unwrap_links(&s);
    let s = EXTERNAL_LABELED.replace_all(&s, "$1");
    let s = EXTERNAL_BARE.replace_all(&s, "");
    let s = QUOTES.replace_all(&s, "");
    let s = TAG.replace_all(&s, "");
    let s = SPACES.replace_all(&s, " ");
    let s = SPACE_BEFORE_PUNCT.replace_all(s.trim(), "$1");
    s.into_owned()
}

/// Plain text of a wikitext fragment: citations and templates removed, links
/// reduced to their labels, emphasis quotes and residual tags dropped,
/// whitespace collapsed. Idempotent.
pub fn strip_markup(text: &str) -> String {
    let mut current = strip_once(text);
    loop {
        let next = strip_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}
