//! Human-study evaluation: stratified sampling of pre-labeled diffs, ground
//! truth by label union, Krippendorff's alpha, rule precision/recall and
//! ROC-AUC.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diff::EditDiff;
use crate::error::{EvalError, ParseError};
use crate::revision::{sha1_hex, timestamp_format};
use crate::rules::Category;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub diff_id: String,
    pub annotator_id: String,
    #[serde(default)]
    pub categories: BTreeSet<Category>,
    #[serde(default)]
    pub none_flag: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(with = "timestamp_format")]
    pub submitted_at: DateTime<Utc>,
}

impl AnnotationRecord {
    /// Exactly one of "some categories" and "none" must hold.
    pub fn validate(&self) -> Result<(), EvalError> {
        match (self.categories.is_empty(), self.none_flag) {
            (true, false) => Err(EvalError::InvalidRecord("select at least one category or none".into())),
            (false, true) => Err(EvalError::InvalidRecord("categories and none are mutually exclusive".into())),
            _ => Ok(()),
        }
    }
}

/// Reads a JSONL annotation log, reporting the first bad line.
pub fn read_annotation_log<R: BufRead>(input: R) -> Result<Vec<AnnotationRecord>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| ParseError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord = serde_json::from_str(&line).map_err(|e| ParseError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        rec.validate().map_err(|e| ParseError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// A diff in the sampling pool with its rule-engine labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub diff_id: String,
    #[serde(default)]
    pub labels: BTreeSet<Category>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quotas {
    pub point_of_view: usize,
    pub clarification: usize,
    pub remainder: usize,
}

impl Default for Quotas {
    fn default() -> Self {
        Quotas {
            point_of_view: 100,
            clarification: 100,
            remainder: 800,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    PointOfView,
    Clarification,
    Remainder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledDiff {
    pub diff_id: String,
    pub stratum: Stratum,
}

/// Draws POV diffs, then clarification diffs, then the remainder from
/// whatever is left, all without replacement. With `backfill`, a short
/// stratum is topped up from the remainder instead of failing.
pub fn stratified_sample(
    pool: &[PoolEntry],
    quotas: Quotas,
    seed: u64,
    backfill: bool,
) -> Result<Vec<SampledDiff>, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let unique: Vec<&PoolEntry> = pool.iter().filter(|e| seen.insert(e.diff_id.as_str())).collect();
    let mut taken = vec![false; unique.len()];
    let mut out = Vec::with_capacity(quotas.point_of_view + quotas.clarification + quotas.remainder);
    let mut carry = 0;

    let strata = [
        (Stratum::PointOfView, quotas.point_of_view, Some(Category::PointOfView)),
        (Stratum::Clarification, quotas.clarification, Some(Category::Clarification)),
        (Stratum::Remainder, quotas.remainder, None),
    ];
    for (stratum, quota, label) in strata {
        let required = quota + if label.is_none() { carry } else { 0 };
        let mut candidates: Vec<usize> = (0..unique.len())
            .filter(|&i| !taken[i] && label.is_none_or(|c| unique[i].labels.contains(&c)))
            .collect();
        if candidates.len() < required {
            if !backfill {
                return Err(EvalError::QuotaShortfall {
                    stratum: format!("{stratum:?}"),
                    required,
                    available: candidates.len(),
                    shortfall: required - candidates.len(),
                });
            }
            if label.is_some() {
                carry += required - candidates.len();
            }
        }
        candidates.shuffle(&mut rng);
        for &i in candidates.iter().take(required) {
            taken[i] = true;
            out.push(SampledDiff {
                diff_id: unique[i].diff_id.clone(),
                stratum,
            });
        }
    }
    Ok(out)
}

/// Opaque identifier for a diff that does not expose revision ids.
pub fn opaque_diff_id(diff: &EditDiff) -> String {
    let digest = sha1_hex(&format!("{}:{}:{}", diff.page_id, diff.old_rev_id, diff.new_rev_id));
    format!("d{}", &digest[..12])
}

/// One diff chosen for the human study, with the rule engine's labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub diff_id: String,
    pub stratum: Stratum,
    #[serde(default)]
    pub labels: BTreeSet<Category>,
    pub diff: EditDiff,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudySample {
    pub seed: u64,
    pub diffs: Vec<SampleEntry>,
}

impl StudySample {
    pub fn pool_entries(&self) -> Vec<PoolEntry> {
        self.diffs
            .iter()
            .map(|e| PoolEntry {
                diff_id: e.diff_id.clone(),
                labels: e.labels.clone(),
            })
            .collect()
    }
}

pub type GroundTruth = BTreeMap<String, BTreeSet<Category>>;

/// Union of categories per diff, over diffs seen by at least `min_annotators` people.
pub fn aggregate_ground_truth(records: &[AnnotationRecord], min_annotators: usize) -> GroundTruth {
    let mut annotators: HashMap<&str, HashSet<&str>> = HashMap::new();
    let mut union: BTreeMap<String, BTreeSet<Category>> = BTreeMap::new();
    for r in records {
        annotators.entry(&r.diff_id).or_default().insert(&r.annotator_id);
        union.entry(r.diff_id.clone()).or_default().extend(r.categories.iter().copied());
    }
    union.retain(|id, _| annotators.get(id.as_str()).is_some_and(|a| a.len() >= min_annotators));
    union
}

/// A ratio whose denominator may be zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Defined(f64),
    Undefined,
}

impl Ratio {
    pub fn of(num: usize, den: usize) -> Ratio {
        if den == 0 {
            Ratio::Undefined
        } else {
            Ratio::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Defined(v) => Some(v),
            Ratio::Undefined => None,
        }
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Defined(v) => write!(f, "{v:.3}"),
            Ratio::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ratio::Defined(v) => s.serialize_f64(*v),
            Ratio::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Ratio::Defined(v)),
            Raw::Text(t) if t == "undefined" => Ok(Ratio::Undefined),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"undefined\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
}

impl Scores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Scores {
        let precision = Ratio::of(tp, tp + fp);
        let recall = Ratio::of(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Ratio::Defined(_), Ratio::Defined(_)) => Ratio::of(2 * tp, 2 * tp + fp + fn_),
            _ => Ratio::Undefined,
        };
        Scores {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }
}

/// Rule scores per category over the ground-truth diff set; diffs without a
/// verdict count as unlabeled by the rules.
pub fn rule_precision_recall(
    predicted: &HashMap<String, BTreeSet<Category>>,
    truth: &GroundTruth,
) -> BTreeMap<Category, Scores> {
    let empty = BTreeSet::new();
    Category::ALL
        .iter()
        .map(|&c| {
            let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
            for (id, gold) in truth {
                let pred = predicted.get(id).unwrap_or(&empty).contains(&c);
                match (pred, gold.contains(&c)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => tn += 1,
                }
            }
            (c, Scores::from_counts(tp, fp, fn_, tn))
        })
        .collect()
}

/// Nominal Krippendorff's alpha over an items x annotators matrix with
/// missing cells. Items with fewer than two values are not pairable and are
/// ignored. When every pairable value is identical the expected disagreement
/// is zero and alpha is reported as 1.
pub fn krippendorff_alpha(matrix: &[Vec<Option<u32>>]) -> Result<f64, EvalError> {
    let mut coincidence: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut pairable = 0;
    for item in matrix {
        let values: Vec<u32> = item.iter().flatten().copied().collect();
        let m = values.len();
        if m < 2 {
            continue;
        }
        pairable += 1;
        let weight = 1.0 / (m - 1) as f64;
        for (i, &a) in values.iter().enumerate() {
            for (j, &b) in values.iter().enumerate() {
                if i != j {
                    *coincidence.entry((a, b)).or_default() += weight;
                }
            }
        }
    }
    if pairable < 2 {
        return Err(EvalError::TooFewPairableItems { found: pairable });
    }
    let mut marginals: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(a, _), &w) in &coincidence {
        *marginals.entry(a).or_default() += w;
    }
    let n: f64 = marginals.values().sum();
    let observed: f64 = coincidence.iter().filter(|((a, b), _)| a != b).map(|(_, w)| w).sum();
    let sum_sq: f64 = marginals.values().map(|v| v * v).sum();
    let expected = (n * n - sum_sq) / (n - 1.0);
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - observed / expected)
}

/// Binary matrix for one category: rows follow `diff_ids`, columns are the
/// distinct annotators in first-seen order.
pub fn category_matrix(records: &[AnnotationRecord], diff_ids: &[String], category: Category) -> Vec<Vec<Option<u32>>> {
    let mut annotators: Vec<&str> = Vec::new();
    let mut column: HashMap<&str, usize> = HashMap::new();
    for r in records {
        column.entry(&r.annotator_id).or_insert_with(|| {
            annotators.push(&r.annotator_id);
            annotators.len() - 1
        });
    }
    let row: HashMap<&str, usize> = diff_ids.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let mut matrix = vec![vec![None; annotators.len()]; diff_ids.len()];
    for r in records {
        if let Some(&i) = row.get(r.diff_id.as_str()) {
            matrix[i][column[r.annotator_id.as_str()]] = Some(u32::from(r.categories.contains(&category)));
        }
    }
    matrix
}

/// Probability that a random positive outscores a random negative, ties half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * mid_rank;
        i = j + 1;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub sample_size: usize,
    /// Diffs with at least one label.
    pub labeled: usize,
    /// Diffs meeting the annotator minimum.
    pub ground_truth: usize,
    pub annotations: usize,
    pub annotators: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub coverage: Coverage,
    pub alpha: BTreeMap<Category, Ratio>,
    pub rules: BTreeMap<Category, Scores>,
}

/// Metrics for an annotation log against the sample's rule labels.
pub fn study_report(
    records: &[AnnotationRecord],
    sample: &[PoolEntry],
    min_annotators: usize,
) -> StudyReport {
    let sample_ids: HashSet<&str> = sample.iter().map(|e| e.diff_id.as_str()).collect();
    let in_sample: Vec<AnnotationRecord> = records
        .iter()
        .filter(|r| sample_ids.contains(r.diff_id.as_str()))
        .cloned()
        .collect();
    let truth = aggregate_ground_truth(&in_sample, min_annotators);
    let diff_ids: Vec<String> = sample.iter().map(|e| e.diff_id.clone()).collect();
    let alpha = Category::ALL
        .iter()
        .map(|&c| {
            let value = krippendorff_alpha(&category_matrix(&in_sample, &diff_ids, c)).map_or(Ratio::Undefined, Ratio::Defined);
            (c, value)
        })
        .collect();
    let predicted: HashMap<String, BTreeSet<Category>> =
        sample.iter().map(|e| (e.diff_id.clone(), e.labels.clone())).collect();
    let labeled: HashSet<&str> = in_sample.iter().map(|r| r.diff_id.as_str()).collect();
    let annotators: HashSet<&str> = in_sample.iter().map(|r| r.annotator_id.as_str()).collect();
    StudyReport {
        coverage: Coverage {
            sample_size: sample.len(),
            labeled: labeled.len(),
            ground_truth: truth.len(),
            annotations: in_sample.len(),
            annotators: annotators.len(),
        },
        alpha,
        rules: rule_precision_recall(&predicted, &truth),
    }
}

impl StudyReport {
    pub fn render_table(&self) -> String {
        let c = &self.coverage;
        let mut out = format!(
            "{} of {} labeled; {} with enough annotators; {} annotations by {} annotators\n\n",
            c.labeled, c.sample_size, c.ground_truth, c.annotations, c.annotators
        );
        let _ = writeln!(out, "{:<14} {:>9} {:>9} {:>9} {:>9} {:>5} {:>5} {:>5}", "category", "alpha", "precision", "recall", "f1", "tp", "fp", "fn");
        for cat in Category::ALL {
            let s = &self.rules[&cat];
            let _ = writeln!(
                out,
                "{:<14} {:>9} {:>9} {:>9} {:>9} {:>5} {:>5} {:>5}",
                cat.as_str(),
                self.alpha[&cat].to_string(),
                s.precision.to_string(),
                s.recall.to_string(),
                s.f1.to_string(),
                s.tp,
                s.fp,
                s.fn_
            );
        }
        out
    }
}
