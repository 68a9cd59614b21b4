//! Hashed n-gram logistic regression for sentence quality.
//!
//! Tokens are unigrams plus `a_b` bigrams, hashed with 64-bit FNV-1a and
//! masked to 2^18 buckets; counts are L2-normalized. Training is seeded SGD
//! over the logistic loss with a small L2 penalty. Each epoch is accepted only
//! if the full training loss does not rise; otherwise it is rolled back and
//! the learning rate halved.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledSentence;
use crate::error::ModelError;
use crate::eval::{roc_auc, Ratio, Scores};
use crate::rules::Category;
use crate::wikitext::strip_markup;

pub const HASH_BITS: u32 = 18;
pub const DIMENSIONS: usize = 1 << HASH_BITS;
const MODEL_MAGIC: &[u8; 8] = b"SQMODEL\0";
const MODEL_VERSION: u32 = 1;

/// Markup stripped, non-alphanumerics turned into spaces, lowercased.
pub fn preprocess(sentence: &str) -> Vec<String> {
    let plain: String = strip_markup(sentence)
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    plain.to_lowercase().split_whitespace().map(str::to_string).collect()
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn bucket(feature: &str) -> u32 {
    (fnv1a64(feature.as_bytes()) & (DIMENSIONS as u64 - 1)) as u32
}

/// Sparse features sorted by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| weights[i as usize] * v).sum()
    }
}

pub fn featurize(tokens: &[String]) -> FeatureVector {
    let mut counts: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    for t in tokens {
        *counts.entry(bucket(t)).or_default() += 1.0;
    }
    for w in tokens.windows(2) {
        *counts.entry(bucket(&format!("{}_{}", w[0], w[1]))).or_default() += 1.0;
    }
    let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
    FeatureVector {
        entries: counts.into_iter().map(|(i, v)| (i, v / norm)).collect(),
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub type Example = (FeatureVector, bool);

/// Mean logistic loss plus `l2 / 2 * |w|^2`.
pub fn logistic_loss(weights: &[f64], bias: f64, examples: &[Example], l2: f64) -> f64 {
    let data: f64 = examples
        .iter()
        .map(|(x, y)| {
            let z = x.dot(weights) + bias;
            if *y { softplus(-z) } else { softplus(z) }
        })
        .sum::<f64>()
        / examples.len().max(1) as f64;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logistic_loss`] with respect to the weights and the bias.
pub fn logistic_gradient(weights: &[f64], bias: f64, examples: &[Example], l2: f64) -> (Vec<f64>, f64) {
    let n = examples.len().max(1) as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_b = 0.0;
    for (x, y) in examples {
        let r = (sigmoid(x.dot(weights) + bias) - f64::from(u8::from(*y))) / n;
        for &(i, v) in &x.entries {
            grad[i as usize] += r * v;
        }
        grad_b += r;
    }
    (grad, grad_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: u32,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 10,
            learning_rate: 0.5,
            l2: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub category: Option<Category>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub options: TrainOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: u32,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    pub learning_rate: f64,
    /// Attempts rolled back before this epoch was accepted.
    pub rollbacks: u32,
}

const MAX_ROLLBACKS: u32 = 30;

pub fn examples_of(sentences: &[LabeledSentence]) -> Vec<Example> {
    sentences.iter().map(|s| (featurize(&preprocess(&s.text)), s.is_positive())).collect()
}

/// Trains on featurized examples; logs one entry per epoch.
pub fn train_examples(
    train: &[Example],
    validation: &[Example],
    options: &TrainOptions,
) -> Result<(Model, Vec<EpochLog>), ModelError> {
    if train.is_empty() {
        return Err(ModelError::Empty);
    }
    let positives = train.iter().filter(|e| e.1).count();
    if positives == 0 || positives == train.len() {
        return Err(ModelError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut weights = vec![0.0; DIMENSIONS];
    let mut bias = 0.0;
    let mut lr = options.learning_rate;
    let mut loss = logistic_loss(&weights, bias, train, options.l2);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();

    for epoch in 1..=options.epochs {
        let mut rollbacks = 0;
        loop {
            order.shuffle(&mut rng);
            let mut w = weights.clone();
            let mut b = bias;
            for &k in &order {
                let (x, y) = &train[k];
                let r = sigmoid(x.dot(&w) + b) - f64::from(u8::from(*y));
                for &(i, v) in &x.entries {
                    let i = i as usize;
                    w[i] -= lr * (r * v + options.l2 * w[i]);
                }
                b -= lr * r;
            }
            let new_loss = logistic_loss(&w, b, train, options.l2);
            if new_loss <= loss || rollbacks >= MAX_ROLLBACKS {
                if new_loss <= loss {
                    weights = w;
                    bias = b;
                    loss = new_loss;
                }
                break;
            }
            rollbacks += 1;
            lr /= 2.0;
        }
        let validation_loss = (!validation.is_empty()).then(|| logistic_loss(&weights, bias, validation, options.l2));
        log::info!("epoch {epoch}: train loss {loss:.6}, lr {lr}");
        log.push(EpochLog {
            epoch,
            train_loss: loss,
            validation_loss,
            learning_rate: lr,
            rollbacks,
        });
    }
    Ok((
        Model {
            category: None,
            weights,
            bias,
            options: *options,
        },
        log,
    ))
}

pub fn train(
    train: &[LabeledSentence],
    validation: &[LabeledSentence],
    options: &TrainOptions,
) -> Result<(Model, Vec<EpochLog>), ModelError> {
    let (mut model, log) = train_examples(&examples_of(train), &examples_of(validation), options)?;
    model.category = train.first().map(|s| s.category);
    Ok((model, log))
}

impl Model {
    pub fn zero() -> Model {
        Model {
            category: None,
            weights: vec![0.0; DIMENSIONS],
            bias: 0.0,
            options: TrainOptions::default(),
        }
    }

    pub fn predict_features(&self, x: &FeatureVector) -> f64 {
        sigmoid(x.dot(&self.weights) + self.bias)
    }

    /// Probability that the sentence needs the model's improvement.
    pub fn predict(&self, sentence: &str) -> f64 {
        self.predict_features(&featurize(&preprocess(sentence)))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), ModelError> {
        let nonzero: Vec<(u32, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i as u32, *w))
            .collect();
        let category = self
            .category
            .map_or(u8::MAX, |c| Category::ALL.iter().position(|&x| x == c).unwrap() as u8);
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&MODEL_VERSION.to_le_bytes())?;
        out.write_all(&[category])?;
        out.write_all(&HASH_BITS.to_le_bytes())?;
        out.write_all(&self.bias.to_le_bytes())?;
        out.write_all(&self.options.seed.to_le_bytes())?;
        out.write_all(&self.options.epochs.to_le_bytes())?;
        out.write_all(&self.options.learning_rate.to_le_bytes())?;
        out.write_all(&self.options.l2.to_le_bytes())?;
        out.write_all(&(nonzero.len() as u32).to_le_bytes())?;
        for (i, w) in nonzero {
            out.write_all(&i.to_le_bytes())?;
            out.write_all(&w.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Model, ModelError> {
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        let mut cursor = Cursor { data: &data, pos: 0 };
        if cursor.take(8)? != MODEL_MAGIC {
            return Err(ModelError::Format("missing model header".into()));
        }
        let version = cursor.u32()?;
        if version != MODEL_VERSION {
            return Err(ModelError::Format(format!("unsupported model version {version}")));
        }
        let category = match cursor.take(1)?[0] {
            u8::MAX => None,
            k => Some(
                *Category::ALL
                    .get(k as usize)
                    .ok_or_else(|| ModelError::Format(format!("unknown category code {k}")))?,
            ),
        };
        let bits = cursor.u32()?;
        if bits != HASH_BITS {
            return Err(ModelError::Format(format!("model uses {bits} hash bits, expected {HASH_BITS}")));
        }
        let bias = cursor.f64()?;
        let options = TrainOptions {
            seed: cursor.u64()?,
            epochs: cursor.u32()?,
            learning_rate: cursor.f64()?,
            l2: cursor.f64()?,
        };
        let count = cursor.u32()? as usize;
        let mut weights = vec![0.0; DIMENSIONS];
        for _ in 0..count {
            let i = cursor.u32()? as usize;
            let w = cursor.f64()?;
            if i >= DIMENSIONS || !w.is_finite() {
                return Err(ModelError::Format(format!("bad weight entry at index {i}")));
            }
            weights[i] = w;
        }
        if cursor.pos != data.len() {
            return Err(ModelError::Format("trailing bytes after weights".into()));
        }
        if !bias.is_finite() {
            return Err(ModelError::Format("non-finite bias".into()));
        }
        Ok(Model {
            category,
            weights,
            bias,
            options,
        })
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let slice = self
            .data
            .get(self.pos..self.pos + n)
            .ok_or_else(|| ModelError::Format("truncated model file".into()))?;
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub threshold: f64,
    pub support: usize,
    pub scores: Scores,
    pub roc_auc: Ratio,
}

/// Scores a model on labeled sentences; a prediction is positive when p > threshold.
pub fn evaluate_model(model: &Model, test: &[LabeledSentence], threshold: f64) -> ModelMetrics {
    let probs: Vec<f64> = test.iter().map(|s| model.predict(&s.text)).collect();
    let labels: Vec<bool> = test.iter().map(LabeledSentence::is_positive).collect();
    evaluate_scores(&probs, &labels, threshold)
}

pub fn evaluate_scores(probs: &[f64], labels: &[bool], threshold: f64) -> ModelMetrics {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &y) in probs.iter().zip(labels) {
        match (p > threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    ModelMetrics {
        threshold,
        support: probs.len(),
        scores: Scores::from_counts(tp, fp, fn_, tn),
        roc_auc: roc_auc(probs, labels).map_or(Ratio::Undefined, Ratio::Defined),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Polarity;
    use rand::Rng;

    #[test]
    fn preprocessing() {
        assert_eq!(preprocess("The [[Battle]] was <ref>x</ref> HUGE!"), vec!["the", "battle", "was", "huge"]);
        assert!(preprocess("").is_empty());
        assert_eq!(preprocess("already clean text"), vec!["already", "clean", "text"]);
    }

    #[test]
    fn hashing_is_fnv1a() {
        // reference digests of the 64-bit FNV-1a test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn features() {
        assert!(featurize(&[]).entries.is_empty());
        let toks: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let f = featurize(&toks);
        assert_eq!(f.entries.len(), 3);
        let mut expected = vec![bucket("a"), bucket("b"), bucket("a_b")];
        expected.sort();
        assert_eq!(f.entries.iter().map(|e| e.0).collect::<Vec<_>>(), expected);
        let norm: f64 = f.entries.iter().map(|e| e.1 * e.1).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(f.entries.iter().all(|e| (e.0 as usize) < DIMENSIONS));
    }

    #[test]
    fn zero_model_is_half() {
        assert_eq!(Model::zero().predict("anything at all"), 0.5);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = 12;
        for _ in 0..20 {
            let examples: Vec<Example> = (0..8)
                .map(|_| {
                    let mut idx: Vec<u32> = (0..dims as u32).filter(|_| rng.random_bool(0.4)).collect();
                    idx.dedup();
                    let entries = idx.into_iter().map(|i| (i, rng.random_range(-1.0..1.0))).collect();
                    (FeatureVector { entries }, rng.random_bool(0.5))
                })
                .collect();
            let w: Vec<f64> = (0..dims).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let l2 = 0.01;
            let (grad, grad_b) = logistic_gradient(&w, b, &examples, l2);
            let h = 1e-5;
            for i in 0..dims {
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[i] += h;
                minus[i] -= h;
                let numeric = (logistic_loss(&plus, b, &examples, l2) - logistic_loss(&minus, b, &examples, l2)) / (2.0 * h);
                let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-4);
                assert!(rel < 1e-6, "component {i}: analytic {} numeric {numeric}", grad[i]);
            }
            let numeric_b = (logistic_loss(&w, b + h, &examples, l2) - logistic_loss(&w, b - h, &examples, l2)) / (2.0 * h);
            assert!((numeric_b - grad_b).abs() / numeric_b.abs().max(1e-4) < 1e-6);
        }
    }

    fn sentinel_corpus(n: usize, seed: u64) -> Vec<LabeledSentence> {
        let words = ["river", "town", "built", "north", "early", "church", "became", "known", "large", "famous"];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let positive = i % 2 == 0;
                let mut toks: Vec<&str> = (0..8).map(|_| words[rng.random_range(0..words.len())]).collect();
                if positive {
                    toks.insert(rng.random_range(0..toks.len()), "zzquality");
                }
                LabeledSentence::new(
                    toks.join(" "),
                    Category::Citation,
                    if positive { Polarity::Positive } else { Polarity::Negative },
                    i as u64,
                    i as u64,
                    "",
                )
            })
            .collect()
    }

    #[test]
    fn learns_sentinel_and_loss_never_rises() {
        let data = sentinel_corpus(400, 1);
        let (model, log) = train(&data[..300], &data[300..], &TrainOptions { epochs: 6, ..Default::default() }).unwrap();
        for w in log.windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss + 1e-12);
        }
        let m = evaluate_model(&model, &data[300..], 0.5);
        assert!(m.scores.f1.value().unwrap() >= 0.99);
        assert!(model.predict("the river zzquality town") > 0.9);
        assert_eq!(model.predict("The River  "), model.predict("the river"));
        assert_eq!(evaluate_model(&model, &data[300..], 1.0).scores.recall, Ratio::Defined(0.0));
    }

    #[test]
    fn training_errors() {
        assert!(matches!(train(&[], &[], &TrainOptions::default()), Err(ModelError::Empty)));
        let one_class: Vec<_> = sentinel_corpus(10, 2).into_iter().filter(|s| s.is_positive()).collect();
        assert!(matches!(train(&one_class, &[], &TrainOptions::default()), Err(ModelError::SingleClass)));
    }

    #[test]
    fn model_file_round_trip() {
        let data = sentinel_corpus(60, 4);
        let (model, _) = train(&data, &[], &TrainOptions { epochs: 2, seed: 9, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = Model::read_from(&buf[..]).unwrap();
        assert_eq!(back, model);
        assert!(matches!(Model::read_from(&buf[..buf.len() - 3]), Err(ModelError::Format(_))));
        assert!(matches!(Model::read_from(&b"nonsense"[..]), Err(ModelError::Format(_))));
    }

    #[test]
    fn random_scores_give_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let probs: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let labels: Vec<bool> = (0..2000).map(|i| i % 2 == 0).collect();
        let auc = evaluate_scores(&probs, &labels, 0.5).roc_auc.value().unwrap();
        assert!((auc - 0.5).abs() < 0.05);
    }
}
