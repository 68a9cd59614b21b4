//! Labeled sentence corpora: positives mined from edit histories, negatives
//! from Featured Articles, and balanced page-disjoint train/validation/test
//! splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::diff::diff_pair;
use crate::error::CorpusError;
use crate::reverts::{detect_reverts, RevertConfig};
use crate::revision::{QualityClass, Revision};
use crate::rules::{label_edit, Category};
use crate::wikitext::{
    detect_citation, heading_title, normalize_section_title, split_sentences, strip_markup, Mode, LEAD_SECTION,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub text: String,
    pub category: Category,
    pub polarity: Polarity,
    pub page_id: u64,
    pub rev_id: u64,
    pub section_title: String,
    pub char_len: usize,
    pub word_len: usize,
}

impl LabeledSentence {
    pub fn new(
        text: String,
        category: Category,
        polarity: Polarity,
        page_id: u64,
        rev_id: u64,
        section: &str,
    ) -> LabeledSentence {
        LabeledSentence {
            char_len: text.chars().count(),
            word_len: text.split_whitespace().count(),
            text,
            category,
            polarity,
            page_id,
            rev_id,
            section_title: normalize_section_title(section),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExtractOptions {
    pub mode: Mode,
    pub reverts: RevertConfig,
    /// Restrict output to one category.
    pub category: Option<Category>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub pairs: usize,
    pub pairs_excluded_by_revert: usize,
    pub malformed_skipped: usize,
    pub duplicates_dropped: usize,
}

/// Positive sentences from one page history in `(timestamp, rev_id)` order.
pub fn extract_positive_sentences(
    revs: &[Revision],
    options: &ExtractOptions,
    stats: &mut ExtractStats,
) -> Result<Vec<LabeledSentence>, CorpusError> {
    let statuses = detect_reverts(revs, &options.reverts)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for i in 1..revs.len() {
        let (prev, cur) = (&revs[i - 1], &revs[i]);
        stats.pairs += 1;
        if options.reverts.excludes(statuses[i]) {
            stats.pairs_excluded_by_revert += 1;
            continue;
        }
        if !prev.digest_matches() || !cur.digest_matches() {
            stats.malformed_skipped += 1;
            continue;
        }
        let verdict = label_edit(&diff_pair(prev, cur), options.mode);
        for pos in verdict.positive_sentences {
            if options.category.is_some_and(|c| c != pos.category) || pos.text.is_empty() {
                continue;
            }
            if !seen.insert((pos.category, pos.text.clone())) {
                stats.duplicates_dropped += 1;
                continue;
            }
            out.push(LabeledSentence::new(
                pos.text,
                pos.category,
                Polarity::Positive,
                cur.page_id,
                cur.rev_id,
                &pos.section,
            ));
        }
    }
    Ok(out)
}

static COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->").unwrap());

/// Removes balanced `{{...}}` regions that span a line break, keeping inline ones.
fn drop_block_templates(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut copied = 0;
    while i + 1 < bytes.len() {
        if &bytes[i..i + 2] != b"{{" {
            i += 1;
            continue;
        }
        let mut depth = 0usize;
        let mut j = i;
        let mut end = None;
        while j + 1 < bytes.len() {
            match &bytes[j..j + 2] {
                b"{{" => {
                    depth += 1;
                    j += 2;
                }
                b"}}" => {
                    depth -= 1;
                    j += 2;
                    if depth == 0 {
                        end = Some(j);
                        break;
                    }
                }
                _ => j += 1,
            }
        }
        match end {
            Some(e) if text[i..e].contains('\n') => {
                out.push_str(&text[copied..i]);
                copied = e;
                i = e;
            }
            Some(e) => i = e,
            None => break,
        }
    }
    out.push_str(&text[copied..]);
    out
}

fn drop_tables(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for line in text.split_inclusive('\n') {
        let t = line.trim_start();
        if t.starts_with("{|") {
            depth += 1;
        } else if depth > 0 && t.starts_with("|}") {
            depth -= 1;
        } else if depth == 0 {
            out.push_str(line);
        }
    }
    out
}

fn is_body_line(line: &str) -> bool {
    let t = line.trim();
    if t.is_empty() || heading_title(t).is_some() {
        return false;
    }
    if t.starts_with(['*', '#', ':', ';', '|', '!', '{', '}']) {
        return false;
    }
    let lower = t.to_ascii_lowercase();
    !["[[category:", "[[file:", "[[image:", "__"].iter().any(|p| lower.starts_with(p))
}

/// Prose sentences of an article with the section each belongs to.
pub fn body_sentences(text: &str) -> Vec<(String, String)> {
    let cleaned = drop_tables(&drop_block_templates(&COMMENT.replace_all(text, "")));
    let mut section = LEAD_SECTION.to_string();
    let mut out = Vec::new();
    for line in cleaned.lines() {
        if let Some(title) = heading_title(line.trim()) {
            section = title.to_string();
            continue;
        }
        if !is_body_line(line) {
            continue;
        }
        for span in split_sentences(line) {
            out.push((span.text, section.clone()));
        }
    }
    out
}

/// Negative sentences of a Featured Article revision for one category.
/// Citation negatives exclude sentences that carry citation markup.
pub fn extract_negative_sentences(rev: &Revision, category: Category) -> Result<Vec<LabeledSentence>, CorpusError> {
    if rev.quality_class != Some(QualityClass::FA) {
        return Err(CorpusError::NotFeatured { page_id: rev.page_id });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (raw, section) in body_sentences(&rev.text) {
        if category == Category::Citation && detect_citation(&raw, Mode::Default) {
            continue;
        }
        let text = strip_markup(&raw);
        if text.is_empty() || !seen.insert(text.clone()) {
            continue;
        }
        out.push(LabeledSentence::new(text, category, Polarity::Negative, rev.page_id, rev.rev_id, &section));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<LabeledSentence>,
    pub validation: Vec<LabeledSentence>,
    pub test: Vec<LabeledSentence>,
    pub seed: u64,
}

impl CorpusSplit {
    pub fn parts(&self) -> [(&'static str, &Vec<LabeledSentence>); 3] {
        [("train", &self.train), ("validation", &self.validation), ("test", &self.test)]
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub positives_in: usize,
    pub negatives_in: usize,
    /// Negatives dropped because the same text is also a positive.
    pub conflicts_dropped: usize,
    /// Records per polarity after balancing.
    pub per_polarity: usize,
}

/// Train/validation/test sizes for `total` records in 70/10/20 proportion:
/// floors first, then the remainder to the largest fractional parts.
pub fn split_sizes(total: usize) -> [usize; 3] {
    const TENTHS: [usize; 3] = [7, 1, 2];
    let mut sizes = TENTHS.map(|t| total * t / 10);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by_key(|&k| std::cmp::Reverse(total * TENTHS[k] % 10));
    let short = total - sizes.iter().sum::<usize>();
    for &k in order.iter().take(short) {
        sizes[k] += 1;
    }
    sizes
}

/// Per-split (positive, negative) targets for `n` records of each polarity.
/// Odd-sized splits alternate their extra record between polarities.
fn polarity_targets(n: usize) -> [(usize, usize); 3] {
    let sizes = split_sizes(2 * n);
    let mut give_pos = true;
    sizes.map(|s| {
        let half = s / 2;
        if s % 2 == 0 {
            (half, half)
        } else {
            let t = if give_pos { (half + 1, half) } else { (half, half + 1) };
            give_pos = !give_pos;
            t
        }
    })
}

struct PageBucket {
    pos: Vec<LabeledSentence>,
    neg: Vec<LabeledSentence>,
}

fn try_assign(
    pages: &[(u64, PageBucket)],
    targets: [(usize, usize); 3],
) -> Result<[Vec<LabeledSentence>; 3], [(usize, usize); 3]> {
    let mut need = targets;
    let mut out: [Vec<LabeledSentence>; 3] = Default::default();
    for (_, page) in pages {
        let best = (0..3)
            .filter(|&k| {
                (need[k].0 > 0 && !page.pos.is_empty()) || (need[k].1 > 0 && !page.neg.is_empty())
            })
            .max_by_key(|&k| (need[k].0 + need[k].1, std::cmp::Reverse(k)));
        let Some(k) = best else { continue };
        let take_pos = need[k].0.min(page.pos.len());
        let take_neg = need[k].1.min(page.neg.len());
        out[k].extend(page.pos[..take_pos].iter().cloned());
        out[k].extend(page.neg[..take_neg].iter().cloned());
        need[k].0 -= take_pos;
        need[k].1 -= take_neg;
        if need.iter().all(|&(p, q)| p == 0 && q == 0) {
            return Ok(out);
        }
    }
    if need.iter().all(|&(p, q)| p == 0 && q == 0) {
        Ok(out)
    } else {
        Err(need)
    }
}

/// Balances polarities 1:1, resolves text conflicts in favour of positives,
/// and assigns whole pages to train/validation/test in 70/10/20 proportion.
///
/// When page sizes make the exact proportions unreachable, the per-polarity
/// count is reduced until every split can be filled.
pub fn build_splits(
    positives: &[LabeledSentence],
    negatives: &[LabeledSentence],
    seed: u64,
) -> Result<(CorpusSplit, SplitStats), CorpusError> {
    if positives.is_empty() {
        return Err(CorpusError::NoPositives);
    }
    let positive_keys: HashSet<(Category, &str)> = positives.iter().map(|s| (s.category, s.text.as_str())).collect();
    let mut stats = SplitStats {
        positives_in: positives.len(),
        negatives_in: negatives.len(),
        ..SplitStats::default()
    };
    let mut pos: Vec<LabeledSentence> = positives.to_vec();
    let mut neg: Vec<LabeledSentence> = Vec::with_capacity(negatives.len());
    for s in negatives {
        if positive_keys.contains(&(s.category, s.text.as_str())) {
            stats.conflicts_dropped += 1;
        } else {
            neg.push(s.clone());
        }
    }
    if neg.is_empty() {
        return Err(CorpusError::NoNegatives);
    }
    let key = |s: &LabeledSentence| (s.page_id, s.rev_id, s.category, s.text.clone());
    pos.sort_by_key(key);
    neg.sort_by_key(key);
    pos.dedup();
    neg.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_page: BTreeMap<u64, PageBucket> = BTreeMap::new();
    for s in pos {
        by_page.entry(s.page_id).or_insert_with(|| PageBucket { pos: vec![], neg: vec![] }).pos.push(s);
    }
    for s in neg {
        by_page.entry(s.page_id).or_insert_with(|| PageBucket { pos: vec![], neg: vec![] }).neg.push(s);
    }
    let total_pos: usize = by_page.values().map(|b| b.pos.len()).sum();
    let total_neg: usize = by_page.values().map(|b| b.neg.len()).sum();
    let mut pages: Vec<(u64, PageBucket)> = by_page.into_iter().collect();
    for (_, bucket) in &mut pages {
        bucket.pos.shuffle(&mut rng);
        bucket.neg.shuffle(&mut rng);
    }
    pages.shuffle(&mut rng);

    let mut n = total_pos.min(total_neg);
    let parts = loop {
        match try_assign(&pages, polarity_targets(n)) {
            Ok(parts) => break parts,
            Err(need) => {
                let missing: usize = need.iter().map(|&(p, q)| p + q).sum();
                let next = n.saturating_sub(missing.div_ceil(2).max(1));
                log::debug!("page sizes block {n} per polarity; retrying with {next}");
                if next == 0 {
                    break Default::default();
                }
                n = next;
            }
        }
    };
    let [mut train, mut validation, mut test] = parts;
    stats.per_polarity = (train.len() + validation.len() + test.len()) / 2;
    for part in [&mut train, &mut validation, &mut test] {
        part.shuffle(&mut rng);
    }
    Ok((
        CorpusSplit {
            train,
            validation,
            test,
            seed,
        },
        stats,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_sentences<W: Write>(out: W, sentences: &[LabeledSentence]) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for s in sentences {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads JSONL sentences; `name` labels errors.
pub fn read_sentences<R: BufRead>(input: R, name: &str) -> Result<Vec<LabeledSentence>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: name.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| CorpusError::Line {
            file: name.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

/// Writes `train.jsonl`, `validation.jsonl`, `test.jsonl` and `manifest.json` under `dir`.
pub fn export_corpus(split: &CorpusSplit, dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, part) in split.parts() {
        let path = dir.join(format!("{name}.jsonl"));
        let file = File::create(&path).map_err(io_err(&path))?;
        write_sentences(file, part).map_err(io_err(&path))?;
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        seed: split.seed,
        train: split.train.len(),
        validation: split.validation.len(),
        test: split.test.len(),
    };
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&path, body).map_err(io_err(&path))
}

pub fn import_corpus(dir: &Path) -> Result<CorpusSplit, CorpusError> {
    let path = dir.join("manifest.json");
    let raw = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&raw).map_err(|e| CorpusError::Line {
        file: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut parts: HashMap<&str, Vec<LabeledSentence>> = HashMap::new();
    for name in ["train", "validation", "test"] {
        let path = dir.join(format!("{name}.jsonl"));
        let file = File::open(&path).map_err(io_err(&path))?;
        parts.insert(name, read_sentences(BufReader::new(file), &path.display().to_string())?);
    }
    Ok(CorpusSplit {
        train: parts.remove("train").unwrap_or_default(),
        validation: parts.remove("validation").unwrap_or_default(),
        test: parts.remove("test").unwrap_or_default(),
        seed: manifest.seed,
    })
}
