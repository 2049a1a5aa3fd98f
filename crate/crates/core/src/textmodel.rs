//! Unigram + bigram bag-of-words features and a linear max-margin classifier.
//!
//! The trainer minimises the L2-regularised hinge loss
//!
//! ```text
//!   1/2 |w|^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))
//! ```
//!
//! with the per-example cost convention (the loss is summed, not averaged,
//! so duplicating every review is equivalent to doubling `C`). The bias is
//! treated as an extra constant feature and is regularised along with `w`.
//! Optimisation is dual coordinate descent with a duality-gap stopping rule.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Default cost grid: 10^-4 .. 10^2.
pub fn default_c_grid() -> Vec<f64> {
    (-4..=2).map(|e| 10f64.powi(e)).collect()
}

/// How n-gram occurrences become feature values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// 1.0 if the n-gram occurs at all.
    #[default]
    Binary,
    /// Raw occurrence count.
    Count,
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Unigrams followed by space-joined bigrams, with repeats.
pub fn ngrams(text: &str) -> Vec<String> {
    let tokens = tokenize(text);
    let mut out = Vec::with_capacity(tokens.len() * 2);
    out.extend(tokens.iter().cloned());
    out.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

fn ngram_counts(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for g in ngrams(text) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Dense n-gram index: terms are sorted, index `i` belongs to `terms[i]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Vocabulary of every n-gram seen in `texts`.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set = BTreeSet::new();
        for t in texts {
            set.extend(ngrams(t));
        }
        Self::from_sorted(set.into_iter().collect())
    }

    fn from_sorted(terms: Vec<String>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { terms, index }
    }

    /// Rebuilds from an ngram -> index map, checking the indices are dense.
    pub fn from_map(map: &BTreeMap<String, u32>) -> Result<Self> {
        let mut terms = vec![None; map.len()];
        for (t, &i) in map {
            let slot = terms
                .get_mut(i as usize)
                .ok_or_else(|| Error::invalid(format!("vocabulary index {i} out of range")))?;
            if slot.replace(t.clone()).is_some() {
                return Err(Error::invalid(format!("vocabulary index {i} used twice")));
            }
        }
        let terms: Vec<String> = terms.into_iter().map(Option::unwrap).collect();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary { terms, index })
    }

    pub fn to_map(&self) -> BTreeMap<String, u32> {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, ngram: &str) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    pub fn term(&self, idx: u32) -> Option<&str> {
        self.terms.get(idx as usize).map(String::as_str)
    }

    /// Out-of-vocabulary n-grams are dropped.
    pub fn featurize(&self, text: &str, weighting: Weighting) -> FeatureVector {
        let mut entries: Vec<(u32, f64)> = ngram_counts(text)
            .into_iter()
            .filter_map(|(g, n)| {
                self.get(&g).map(|i| {
                    let v = match weighting {
                        Weighting::Binary => 1.0,
                        Weighting::Count => n as f64,
                    };
                    (i, v)
                })
            })
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        FeatureVector { entries }
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn from_entries(mut entries: Vec<(u32, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate feature index"));
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(FeatureVector { entries })
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| w.get(i as usize).copied().unwrap_or(0.0) * v)
            .sum()
    }

    fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }
}

/// Featurize `text`. Without a vocabulary, one is built from `text` itself
/// and returned alongside the vector.
pub fn extract_features(
    text: &str,
    vocab: Option<&Vocabulary>,
) -> (FeatureVector, Option<Vocabulary>) {
    match vocab {
        Some(v) => (v.featurize(text, Weighting::Binary), None),
        None => {
            let v = Vocabulary::build([text]);
            (v.featurize(text, Weighting::Binary), Some(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub weighting: Weighting,
    /// Relative duality gap at which the solver stops.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Seed for the coordinate visiting order.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            weighting: Weighting::Binary,
            tolerance: 1e-6,
            max_epochs: 5_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub n_train: usize,
    pub n_deceptive: usize,
    pub n_truthful: usize,
    pub weighting: Weighting,
    pub epochs: usize,
    pub converged: bool,
    pub relative_gap: f64,
    pub primal_objective: f64,
    pub seed: u64,
}

/// Trained deception classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub vocabulary: Vocabulary,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub cost_c: f64,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    vocabulary: BTreeMap<String, u32>,
    weights: Vec<f64>,
    bias: f64,
    #[serde(rename = "cost_C")]
    cost_c: f64,
    training_metadata: TrainingMetadata,
}

impl LinearModel {
    pub fn featurize(&self, text: &str) -> FeatureVector {
        self.vocabulary.featurize(text, self.metadata.weighting)
    }

    pub fn decision_value(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn predict_text(&self, text: &str) -> Label {
        predict(self, &self.featurize(text))
    }

    pub fn predict_corpus(&self, corpus: &Corpus) -> Vec<Label> {
        corpus.iter().map(|r| self.predict_text(&r.text)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            vocabulary: self.vocabulary.to_map(),
            weights: self.weights.clone(),
            bias: self.bias,
            cost_c: self.cost_c,
            training_metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        let vocabulary = Vocabulary::from_map(&file.vocabulary)?;
        if file.weights.len() != vocabulary.len() {
            return Err(Error::invalid("weights length does not match vocabulary"));
        }
        if !file.bias.is_finite() || file.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("non-finite model parameter"));
        }
        Ok(LinearModel {
            vocabulary,
            weights: file.weights,
            bias: file.bias,
            cost_c: file.cost_c,
            metadata: file.training_metadata,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// 1 iff the decision value is strictly positive; ties go to truthful.
pub fn predict(model: &LinearModel, x: &FeatureVector) -> Label {
    Label::from_bit(model.decision_value(x) > 0.0)
}

pub fn train(corpus: &Corpus, c: f64) -> Result<LinearModel> {
    train_with(corpus, c, &TrainOptions::default())
}

pub fn train_with(corpus: &Corpus, c: f64, opts: &TrainOptions) -> Result<LinearModel> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("cost C must be positive, got {c}")));
    }
    let labels = corpus.labels()?;
    let n_deceptive = labels.iter().filter(|l| l.is_deceptive()).count();
    if n_deceptive == 0 || n_deceptive == labels.len() {
        return Err(Error::invalid(
            "training corpus must contain both truthful and deceptive reviews",
        ));
    }
    let vocabulary = Vocabulary::build(corpus.iter().map(|r| r.text.as_str()));
    let xs: Vec<FeatureVector> = corpus
        .iter()
        .map(|r| vocabulary.featurize(&r.text, opts.weighting))
        .collect();
    let ys: Vec<f64> = labels
        .iter()
        .map(|l| if l.is_deceptive() { 1.0 } else { -1.0 })
        .collect();
    let fit = solve_dual_cd(&xs, &ys, vocabulary.len(), c, opts);
    Ok(LinearModel {
        vocabulary,
        weights: fit.weights,
        bias: fit.bias,
        cost_c: c,
        metadata: TrainingMetadata {
            n_train: labels.len(),
            n_deceptive,
            n_truthful: labels.len() - n_deceptive,
            weighting: opts.weighting,
            epochs: fit.epochs,
            converged: fit.converged,
            relative_gap: fit.relative_gap,
            primal_objective: fit.primal,
            seed: opts.seed,
        },
    })
}

struct Fit {
    weights: Vec<f64>,
    bias: f64,
    epochs: usize,
    converged: bool,
    relative_gap: f64,
    primal: f64,
}

/// Dual coordinate descent for the hinge-loss SVM with the bias folded in
/// as a constant feature of value 1.
fn solve_dual_cd(xs: &[FeatureVector], ys: &[f64], dim: usize, c: f64, opts: &TrainOptions) -> Fit {
    let n = xs.len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let qdiag: Vec<f64> = xs.iter().map(|x| x.norm_sq() + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut epochs = 0;
    let mut converged = false;
    let mut relative_gap = f64::INFINITY;
    let mut primal = f64::INFINITY;
    while epochs < opts.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            let g = ys[i] * (xs[i].dot(&w) + b) - 1.0;
            let a = alpha[i];
            let pg = if a <= 0.0 {
                g.min(0.0)
            } else if a >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let a_new = (a - g / qdiag[i]).clamp(0.0, c);
            let delta = (a_new - a) * ys[i];
            if delta != 0.0 {
                alpha[i] = a_new;
                for &(j, v) in xs[i].entries() {
                    w[j as usize] += delta * v;
                }
                b += delta;
            }
        }
        let half_norm = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
        let loss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| (1.0 - y * (x.dot(&w) + b)).max(0.0))
            .sum();
        primal = half_norm + c * loss;
        let dual = alpha.iter().sum::<f64>() - half_norm;
        relative_gap = (primal - dual).max(0.0) / primal.abs().max(f64::MIN_POSITIVE);
        if relative_gap <= opts.tolerance {
            converged = true;
            break;
        }
    }
    Fit {
        weights: w,
        bias: b,
        epochs,
        converged,
        relative_gap,
        primal,
    }
}

/// Sensitivity, specificity and their mean for one set of predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl BinaryMetrics {
    pub fn from_pairs(gold: &[Label], predicted: &[Label]) -> Self {
        let mut m = BinaryMetrics {
            tp: 0,
            fn_: 0,
            tn: 0,
            fp: 0,
        };
        for (g, p) in gold.iter().zip(predicted) {
            match (g.is_deceptive(), p.is_deceptive()) {
                (true, true) => m.tp += 1,
                (true, false) => m.fn_ += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fp += 1,
            }
        }
        m
    }

    pub fn sensitivity(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let d = self.tn + self.fp;
        (d > 0).then(|| self.tn as f64 / d as f64)
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.tp + self.fn_ + self.tn + self.fp;
        (self.tp + self.tn) as f64 / n.max(1) as f64
    }

    /// Mean of sensitivity and specificity; `None` unless both classes present.
    pub fn balanced_accuracy(&self) -> Option<f64> {
        Some(0.5 * (self.sensitivity()? + self.specificity()?))
    }
}

/// Stratified random fold assignment by review.
fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; labels.len()];
    for class in [Label::Truthful, Label::Deceptive] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            assign[i] = pos % folds;
        }
    }
    assign
}

/// Mean balanced accuracy of `c` over random stratified folds of `corpus`.
pub fn cv_balanced_accuracy(
    corpus: &Corpus,
    c: f64,
    folds: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<f64> {
    let labels = corpus.labels()?;
    let assign = stratified_folds(&labels, folds, seed);
    let mut scores = Vec::with_capacity(folds);
    for fold in 0..folds {
        let train_part = corpus.filter_indexed(|i| assign[i] != fold);
        let test_part = corpus.filter_indexed(|i| assign[i] == fold);
        if test_part.is_empty() {
            continue;
        }
        let model = train_with(&train_part, c, opts)?;
        let predicted = model.predict_corpus(&test_part);
        let gold = test_part.labels()?;
        if let Some(ba) = BinaryMetrics::from_pairs(&gold, &predicted).balanced_accuracy() {
            scores.push(ba);
        }
    }
    if scores.is_empty() {
        return Err(Error::invalid("no fold had both classes"));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// The grid value with the best mean cross-validated balanced accuracy;
/// ties go to the smallest `C`.
pub fn select_c(corpus: &Corpus, grid: &[f64], folds: usize, seed: u64) -> Result<f64> {
    select_c_with(corpus, grid, folds, seed, &TrainOptions::default()).map(|(c, _)| c)
}

/// Like [`select_c`], also returning the score of every grid value
/// (sorted by `C`).
pub fn select_c_with(
    corpus: &Corpus,
    grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(Error::invalid("empty C grid"));
    }
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() == 1 {
        return Ok((sorted[0], vec![(sorted[0], f64::NAN)]));
    }
    let mut scores = Vec::with_capacity(sorted.len());
    let mut best = (sorted[0], f64::NEG_INFINITY);
    for &c in &sorted {
        let s = cv_balanced_accuracy(corpus, c, folds, seed, opts)?;
        if s > best.1 {
            best = (c, s);
        }
        scores.push((c, s));
    }
    Ok((best.0, scores))
}

/// One leave-one-group-out fold, reported to an observer before training.
#[derive(Debug)]
pub struct GroupFold<'a> {
    pub held_out: &'a str,
    pub train_ids: Vec<&'a str>,
    pub predict_ids: Vec<&'a str>,
}

/// Leave-one-group-out predictions aligned with `corpus` order.
pub fn cross_val_predict_by_group(
    corpus: &Corpus,
    groups: &BTreeMap<String, Corpus>,
    c: f64,
) -> Result<Vec<Label>> {
    cross_val_predict_by_group_observed(corpus, groups, c, &TrainOptions::default(), |_| {})
}

/// [`cross_val_predict_by_group`] with a hook that sees exactly which ids
/// each fold model is trained on and which it predicts.
pub fn cross_val_predict_by_group_observed(
    corpus: &Corpus,
    groups: &BTreeMap<String, Corpus>,
    c: f64,
    opts: &TrainOptions,
    mut observe: impl FnMut(&GroupFold<'_>),
) -> Result<Vec<Label>> {
    if groups.len() < 2 {
        return Err(Error::invalid(format!(
            "grouped cross-validation needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    let mut group_of: HashMap<&str, &str> = HashMap::with_capacity(corpus.len());
    for (g, part) in groups {
        for id in part.ids() {
            if group_of.insert(id, g.as_str()).is_some() {
                return Err(Error::invalid(format!("review {id} appears in two groups")));
            }
        }
    }
    if group_of.len() != corpus.len() || corpus.ids().any(|id| !group_of.contains_key(id)) {
        return Err(Error::invalid("groups do not partition the corpus"));
    }

    let mut predictions: HashMap<&str, Label> = HashMap::with_capacity(corpus.len());
    for (g, held_out) in groups {
        let train_part = corpus.filter(|r| group_of[r.id.as_str()] != g.as_str());
        observe(&GroupFold {
            held_out: g,
            train_ids: train_part.ids().collect(),
            predict_ids: held_out.ids().collect(),
        });
        let model = train_with(&train_part, c, opts)?;
        for (r, p) in held_out.iter().zip(model.predict_corpus(held_out)) {
            predictions.insert(r.id.as_str(), p);
        }
    }
    Ok(corpus.ids().map(|id| predictions[id]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFold {
    pub hotels: Vec<String>,
    pub selected_c: f64,
    pub metrics: BinaryMetrics,
    pub balanced_accuracy: Option<f64>,
}

/// Nested cross-validation: outer folds by hotel, inner random folds pick `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub outer: Vec<OuterFold>,
    pub mean_balanced_accuracy: f64,
    pub pooled: BinaryMetrics,
}

pub fn nested_cv_report(
    corpus: &Corpus,
    grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<CvReport> {
    let mut hotels: Vec<String> = corpus.group_by_hotel().into_keys().collect();
    if hotels.len() < 2 {
        return Err(Error::invalid(
            "nested cross-validation needs at least 2 hotels",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    hotels.shuffle(&mut rng);
    let outer_k = folds.min(hotels.len());
    let fold_of: HashMap<&str, usize> = hotels
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i % outer_k))
        .collect();

    let mut outer = Vec::with_capacity(outer_k);
    let mut pooled_gold = Vec::new();
    let mut pooled_pred = Vec::new();
    for fold in 0..outer_k {
        let train_part = corpus.filter(|r| fold_of[r.hotel_id.as_str()] != fold);
        let test_part = corpus.filter(|r| fold_of[r.hotel_id.as_str()] == fold);
        let (c, _) = select_c_with(&train_part, grid, folds, seed, opts)?;
        let model = train_with(&train_part, c, opts)?;
        let predicted = model.predict_corpus(&test_part);
        let gold = test_part.labels()?;
        let metrics = BinaryMetrics::from_pairs(&gold, &predicted);
        let mut fold_hotels: Vec<String> = hotels
            .iter()
            .filter(|h| fold_of[h.as_str()] == fold)
            .cloned()
            .collect();
        fold_hotels.sort();
        outer.push(OuterFold {
            hotels: fold_hotels,
            selected_c: c,
            metrics,
            balanced_accuracy: metrics.balanced_accuracy(),
        });
        pooled_gold.extend(gold);
        pooled_pred.extend(predicted);
    }
    let scored: Vec<f64> = outer.iter().filter_map(|f| f.balanced_accuracy).collect();
    let mean_balanced_accuracy = scored.iter().sum::<f64>() / scored.len().max(1) as f64;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(CvReport {
        grid: sorted,
        folds,
        seed,
        outer,
        mean_balanced_accuracy,
        pooled: BinaryMetrics::from_pairs(&pooled_gold, &pooled_pred),
    })
}

impl Corpus {
    fn filter_indexed(&self, mut pred: impl FnMut(usize) -> bool) -> Corpus {
        let mut i = 0;
        self.filter(|_| {
            let keep = pred(i);
            i += 1;
            keep
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, Review};

    fn labeled(id: &str, hotel: &str, text: &str, label: Label) -> Review {
        Review {
            id: id.into(),
            community: "test".into(),
            hotel_id: hotel.into(),
            reviewer_id: format!("u-{id}"),
            timestamp: parse_timestamp("2011-01-01T00:00:00Z").unwrap(),
            rating: 5,
            text: text.into(),
            label: Some(label),
        }
    }

    fn zero_model(bias: f64, vocab_text: &str) -> LinearModel {
        let vocabulary = Vocabulary::build([vocab_text]);
        LinearModel {
            weights: vec![0.0; vocabulary.len()],
            vocabulary,
            bias,
            cost_c: 1.0,
            metadata: TrainingMetadata {
                n_train: 0,
                n_deceptive: 0,
                n_truthful: 0,
                weighting: Weighting::Binary,
                epochs: 0,
                converged: true,
                relative_gap: 0.0,
                primal_objective: 0.0,
                seed: 0,
            },
        }
    }

    #[test]
    fn unigrams_and_bigrams() {
        let (x, vocab) = extract_features("Great hotel", None);
        let vocab = vocab.unwrap();
        assert_eq!(x.nnz(), 3);
        for g in ["great", "hotel", "great hotel"] {
            assert!(vocab.get(g).is_some(), "{g}");
        }
    }

    #[test]
    fn empty_text_has_no_features() {
        let (x, vocab) = extract_features("", None);
        assert!(x.is_empty());
        assert!(vocab.unwrap().is_empty());
    }

    #[test]
    fn binary_presence() {
        let (x, vocab) = extract_features("a a a", None);
        let vocab = vocab.unwrap();
        assert_eq!(vocab.len(), 2);
        assert_eq!(x.entries(), &[(0, 1.0), (1, 1.0)]);
        assert_eq!(vocab.term(0), Some("a"));
        assert_eq!(vocab.term(1), Some("a a"));
        let counted = vocab.featurize("a a a", Weighting::Count);
        assert_eq!(counted.entries(), &[(0, 3.0), (1, 2.0)]);
    }

    #[test]
    fn oov_dropped_with_vocab() {
        let vocab = Vocabulary::build(["great hotel"]);
        let (x, none) = extract_features("great food", Some(&vocab));
        assert!(none.is_none());
        assert_eq!(x.entries(), &[(vocab.get("great").unwrap(), 1.0)]);
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(
            tokenize("It's  GREAT!!  5-star"),
            ["it", "s", "great", "5", "star"]
        );
    }

    #[test]
    fn prediction_tie_breaks_to_truthful() {
        let m = zero_model(0.0, "great hotel");
        assert_eq!(m.predict_text("great hotel"), Label::Truthful);

        let mut m = zero_model(0.0, "great hotel");
        let i = m.vocabulary.get("great").unwrap();
        m.weights[i as usize] = 1.0;
        assert_eq!(m.predict_text("great"), Label::Deceptive);

        let m = zero_model(-0.5, "great");
        assert_eq!(predict(&m, &FeatureVector::default()), Label::Truthful);
    }

    #[test]
    fn single_class_rejected() {
        let c = Corpus::new(
            vec![
                labeled("a", "h", "one", Label::Truthful),
                labeled("b", "h", "two", Label::Truthful),
            ],
            "t",
        )
        .unwrap();
        assert!(train(&c, 1.0).is_err());
    }

    #[test]
    fn separable_pair() {
        let c = Corpus::new(
            vec![
                labeled("a", "h", "lovely quiet room", Label::Truthful),
                labeled("b", "h", "amazing luxurious experience", Label::Deceptive),
            ],
            "t",
        )
        .unwrap();
        let m = train(&c, 1.0).unwrap();
        assert!(m.metadata.converged);
        assert_eq!(m.predict_corpus(&c), c.labels().unwrap());
    }

    #[test]
    fn model_json_round_trip_is_bit_exact() {
        let c = Corpus::new(
            vec![
                labeled("a", "h", "lovely quiet room", Label::Truthful),
                labeled("b", "h", "amazing luxurious experience", Label::Deceptive),
                labeled("c", "h", "quiet amazing room", Label::Truthful),
            ],
            "t",
        )
        .unwrap();
        let m = train(&c, 0.37).unwrap();
        let back = LinearModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.weights.iter().zip(&m.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn select_c_single_value() {
        let c = Corpus::new(vec![labeled("a", "h", "x", Label::Truthful)], "t").unwrap();
        assert_eq!(select_c(&c, &[0.5], 5, 0).unwrap(), 0.5);
    }

    #[test]
    fn group_cv_needs_two_groups() {
        let c = Corpus::new(
            vec![
                labeled("a", "h", "x", Label::Truthful),
                labeled("b", "h", "y", Label::Deceptive),
            ],
            "t",
        )
        .unwrap();
        assert!(cross_val_predict_by_group(&c, &c.group_by_hotel(), 1.0).is_err());
    }

    #[test]
    fn vocabulary_map_must_be_dense() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), 0);
        m.insert("b".to_string(), 2);
        assert!(Vocabulary::from_map(&m).is_err());
    }
}
