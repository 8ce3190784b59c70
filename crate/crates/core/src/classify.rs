//! Per-cluster demographic prediction: train/test splitting, prevalence
//! baselines, softmax regression and multinomial naive Bayes, and the task
//! grid runner that evaluates every (cluster, attribute, source, model)
//! combination.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::corpus::Corpus;
use crate::error::{AuditError, Result};
use crate::seed::derive_seed;
use crate::vectorize::DocVector;

/// Demographic attribute being predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Gender,
    AgeGroup,
}

impl Attribute {
    pub const ALL: [Attribute; 2] = [Attribute::Gender, Attribute::AgeGroup];

    pub fn label(&self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::AgeGroup => "age_group",
        }
    }
}

/// Per-category item counts within one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDemographics {
    pub categories: Vec<String>,
    pub counts: Vec<usize>,
}

impl ClusterDemographics {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Prevalence baseline per category plus the across-category average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineAccuracy {
    pub per_category: Vec<(String, f64)>,
    pub average: f64,
}

impl BaselineAccuracy {
    pub fn max(&self) -> f64 {
        self.per_category.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

/// Prevalence baseline: `N_i / sum(N)` per category. The values sum to 1, so
/// their mean is exactly `1 / n_categories`.
pub fn baseline_accuracy(demo: &ClusterDemographics) -> Result<BaselineAccuracy> {
    let total = demo.total();
    if total == 0 || demo.categories.is_empty() {
        return Err(AuditError::Classify("empty cluster has no baseline".into()));
    }
    let per_category = demo
        .categories
        .iter()
        .zip(&demo.counts)
        .map(|(cat, &n)| (cat.clone(), n as f64 / total as f64))
        .collect();
    Ok(BaselineAccuracy {
        per_category,
        average: 1.0 / demo.categories.len() as f64,
    })
}

/// Shuffles and splits ids into (train, test) with `|train| = round(ratio*n)`.
/// Not stratified; deterministic given the seed.
pub fn split_train_test(
    ids: &[String],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    let n = ids.len();
    if n < 5 {
        return Err(AuditError::Classify(format!(
            "cluster too small to split: {n} items (need >= 5)"
        )));
    }
    if !(0.0..1.0).contains(&ratio) || ratio == 0.0 {
        return Err(AuditError::Classify(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut shuffled: Vec<String> = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let test = shuffled.split_off(n_train);
    Ok((shuffled, test))
}

fn argmax_lowest_tie(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Logistic regression (multinomial softmax, mini-batch gradient descent)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            l2: 1e-3,
        }
    }
}

/// Softmax regression model. `weights` is class-major (`n_classes` rows of
/// `n_features`), biases are unpenalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub n_classes: usize,
    pub n_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub l2: f64,
    /// Full-dataset regularized loss after each epoch.
    pub loss_trace: Vec<f64>,
}

impl LogRegModel {
    /// Per-class logits for one input.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_features, "feature dimension mismatch");
        (0..self.n_classes)
            .map(|c| {
                let row = &self.weights[c * self.n_features..(c + 1) * self.n_features];
                self.bias[c] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    /// Argmax class; ties break to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_lowest_tie(&self.scores(x))
    }
}

fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

fn loss_grad_over(
    params: &[f64],
    features: &[Vec<f64>],
    labels: &[usize],
    subset: Option<&[usize]>,
    n_classes: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = subset.map_or(features.len(), <[usize]>::len);
    assert!(n > 0);
    let d = features[0].len();
    assert_eq!(params.len(), n_classes * d + n_classes);
    let (weights, bias) = params.split_at(n_classes * d);

    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    let inv_n = 1.0 / n as f64;
    let mut probs = vec![0.0; n_classes];
    for row in 0..n {
        let i = subset.map_or(row, |s| s[row]);
        let (x, label) = (&features[i], labels[i]);
        for (c, p) in probs.iter_mut().enumerate() {
            *p = bias[c]
                + weights[c * d..(c + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
        }
        softmax(&mut probs);
        loss -= probs[label].max(1e-300).ln() * inv_n;
        for c in 0..n_classes {
            let delta = (probs[c] - if c == label { 1.0 } else { 0.0 }) * inv_n;
            for (g, v) in grad[c * d..(c + 1) * d].iter_mut().zip(x) {
                *g += delta * v;
            }
            grad[n_classes * d + c] += delta;
        }
    }
    for (i, &w) in weights.iter().enumerate() {
        loss += l2 * w * w;
        grad[i] += 2.0 * l2 * w;
    }
    (loss, grad)
}

/// Regularized cross-entropy loss and its gradient at `params`, where
/// `params` is the flattened weight matrix followed by the bias vector.
/// The loss is the mean over samples plus `l2 * ||W||^2` (biases excluded).
pub fn logreg_loss_and_grad(
    params: &[f64],
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    loss_grad_over(params, features, labels, None, n_classes, l2)
}

/// Trains softmax regression by mini-batch gradient descent from zero
/// initialization. Requires at least two classes in the training data.
pub fn train_logreg(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    cfg: &LogRegConfig,
    seed: u64,
) -> Result<LogRegModel> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(AuditError::Classify(
            "features and labels must be non-empty and aligned".into(),
        ));
    }
    let present: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if present.len() < 2 {
        return Err(AuditError::Classify(
            "single-class training data".into(),
        ));
    }
    let d = features[0].len();
    let mut params = vec![0.0; n_classes * d + n_classes];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let (_, grad) = loss_grad_over(&params, features, labels, Some(batch), n_classes, cfg.l2);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        let (loss, _) = loss_grad_over(&params, features, labels, None, n_classes, cfg.l2);
        loss_trace.push(loss);
    }

    let bias = params.split_off(n_classes * d);
    Ok(LogRegModel {
        n_classes,
        n_features: d,
        weights: params,
        bias,
        l2: cfg.l2,
        loss_trace,
    })
}

// ---------------------------------------------------------------------------
// Multinomial naive Bayes (closed form)
// ---------------------------------------------------------------------------

/// Multinomial naive Bayes with additive smoothing, fit in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MNBModel {
    pub n_classes: usize,
    pub n_features: usize,
    pub log_priors: Vec<f64>,
    /// Class-major per-term log likelihoods.
    pub log_likelihoods: Vec<f64>,
    pub alpha: f64,
}

impl MNBModel {
    /// Joint log scores `log P(c) + sum_t x_t log P(t|c)` per class.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_features, "feature dimension mismatch");
        (0..self.n_classes)
            .map(|c| {
                self.log_priors[c]
                    + self.log_likelihoods[c * self.n_features..(c + 1) * self.n_features]
                        .iter()
                        .zip(x)
                        .map(|(ll, v)| ll * v)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_lowest_tie(&self.scores(x))
    }
}

/// Fits MNB from non-negative integer count features:
/// `P(t|c) = (count(t,c) + alpha) / (count(c) + alpha * |V|)`.
pub fn train_mnb(
    counts: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    alpha: f64,
) -> Result<MNBModel> {
    if counts.is_empty() || counts.len() != labels.len() {
        return Err(AuditError::Classify(
            "counts and labels must be non-empty and aligned".into(),
        ));
    }
    if counts.iter().flatten().any(|&v| v < 0.0) {
        return Err(AuditError::Classify("negative count feature".into()));
    }
    let d = counts[0].len();
    let n = counts.len() as f64;
    let mut class_docs = vec![0usize; n_classes];
    let mut term_counts = vec![0.0; n_classes * d];
    for (x, &label) in counts.iter().zip(labels) {
        class_docs[label] += 1;
        for (acc, v) in term_counts[label * d..(label + 1) * d].iter_mut().zip(x) {
            *acc += v;
        }
    }
    let mut log_priors = vec![f64::NEG_INFINITY; n_classes];
    let mut log_likelihoods = vec![f64::NEG_INFINITY; n_classes * d];
    for c in 0..n_classes {
        if class_docs[c] == 0 {
            continue;
        }
        log_priors[c] = (class_docs[c] as f64 / n).ln();
        let total: f64 = term_counts[c * d..(c + 1) * d].iter().sum();
        for t in 0..d {
            log_likelihoods[c * d + t] =
                ((term_counts[c * d + t] + alpha) / (total + alpha * d as f64)).ln();
        }
    }
    Ok(MNBModel {
        n_classes,
        n_features: d,
        log_priors,
        log_likelihoods,
        alpha,
    })
}

// ---------------------------------------------------------------------------
// Task grid
// ---------------------------------------------------------------------------

/// Model family identifiers used in task results and reports.
pub const MODEL_LOGREG: &str = "logreg";
pub const MODEL_MNB: &str = "mnb";

/// One completed prediction task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTaskResult {
    pub cluster: usize,
    pub attribute: Attribute,
    pub feature_source: String,
    pub model: String,
    pub accuracy: f64,
    pub baselines: BaselineAccuracy,
    pub n_train: usize,
    pub n_test: usize,
    pub correct_item_ids: Vec<String>,
    pub split_seed: u64,
    pub warnings: Vec<String>,
}

/// A task that could not run, with the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTask {
    pub cluster: usize,
    pub attribute: Attribute,
    pub feature_source: String,
    pub model: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTasks {
    pub results: Vec<PredictionTaskResult>,
    pub skipped: Vec<SkippedTask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub train_ratio: f64,
    pub logreg: LogRegConfig,
    pub mnb_alpha: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            train_ratio: 0.8,
            logreg: LogRegConfig::default(),
            mnb_alpha: 1.0,
        }
    }
}

/// Everything the task grid needs, with all per-item slices aligned to
/// `corpus.items` order.
pub struct TaskInputs<'a> {
    pub corpus: &'a Corpus,
    pub clustering: &'a ClusterAssignment,
    pub tfidf: &'a [DocVector],
    pub counts: &'a [Vec<f64>],
    pub external: Option<&'a [DocVector]>,
}

fn attribute_label(corpus: &Corpus, idx: usize, attr: Attribute) -> String {
    let item = &corpus.items[idx];
    match attr {
        Attribute::Gender => item.gender.label().to_string(),
        Attribute::AgeGroup => item.age_group.label().to_string(),
    }
}

/// Counts per category over the given item indices, in stable label order.
pub fn cluster_demographics(
    corpus: &Corpus,
    indices: &[usize],
    attr: Attribute,
) -> ClusterDemographics {
    use std::collections::BTreeMap;
    let order: Vec<String> = match attr {
        Attribute::Gender => vec!["female".into(), "male".into()],
        Attribute::AgeGroup => crate::corpus::AgeGroup::ALL
            .iter()
            .map(|g| g.label().to_string())
            .collect(),
    };
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let labels: Vec<String> = indices
        .iter()
        .map(|&i| attribute_label(corpus, i, attr))
        .collect();
    for l in &labels {
        *counts.entry(l.as_str()).or_insert(0) += 1;
    }
    let mut categories = Vec::new();
    let mut out_counts = Vec::new();
    for cat in &order {
        if let Some(&c) = counts.get(cat.as_str()) {
            categories.push(cat.clone());
            out_counts.push(c);
        }
    }
    ClusterDemographics {
        categories,
        counts: out_counts,
    }
}

/// Runs every (cluster x attribute x feature source x model) task: split,
/// train, evaluate against the prevalence baseline, and record the
/// correctly-predicted test ids. Raw class proportions are kept as-is; no
/// resampling or rebalancing is applied.
pub fn run_prediction_tasks(
    inputs: &TaskInputs<'_>,
    cfg: &ClassifyConfig,
    seed: u64,
) -> Result<PredictionTasks> {
    let corpus = inputs.corpus;
    let clustering = inputs.clustering;
    let mut results = Vec::new();
    let mut skipped = Vec::new();

    let mut sources: Vec<(&str, &[DocVector])> = vec![("tfidf", inputs.tfidf)];
    if let Some(ext) = inputs.external {
        sources.push(("external", ext));
    }

    let index_of_id: std::collections::BTreeMap<&str, usize> = corpus
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.id.as_str(), i))
        .collect();

    for cluster in 0..clustering.k {
        let members = clustering.member_indices(cluster);
        let member_ids: Vec<String> =
            members.iter().map(|&i| corpus.items[i].id.clone()).collect();
        let split_seed = derive_seed(seed, "split", &[cluster as u64]);

        let split = split_train_test(&member_ids, cfg.train_ratio, split_seed);
        for attr in Attribute::ALL {
            let demo = cluster_demographics(corpus, &members, attr);
            let grid: Vec<(&str, &str)> = sources
                .iter()
                .map(|(name, _)| (*name, MODEL_LOGREG))
                .chain(std::iter::once(("tfidf", MODEL_MNB)))
                .collect();

            let (train_ids, test_ids) = match &split {
                Ok(pair) => pair.clone(),
                Err(e) => {
                    for (source, model) in &grid {
                        skipped.push(SkippedTask {
                            cluster,
                            attribute: attr,
                            feature_source: source.to_string(),
                            model: model.to_string(),
                            reason: e.to_string(),
                        });
                    }
                    continue;
                }
            };

            let baselines = baseline_accuracy(&demo)?;
            let category_index: std::collections::BTreeMap<&str, usize> = demo
                .categories
                .iter()
                .enumerate()
                .map(|(i, c)| (c.as_str(), i))
                .collect();
            let label_of = |id: &str| -> usize {
                let idx = index_of_id[id];
                category_index[attribute_label(corpus, idx, attr).as_str()]
            };
            let train_labels: Vec<usize> = train_ids.iter().map(|id| label_of(id)).collect();
            let test_labels: Vec<usize> = test_ids.iter().map(|id| label_of(id)).collect();

            let distinct_train: std::collections::BTreeSet<usize> =
                train_labels.iter().copied().collect();
            let mut warnings = Vec::new();
            if distinct_train.len() < 2 {
                for (source, model) in &grid {
                    skipped.push(SkippedTask {
                        cluster,
                        attribute: attr,
                        feature_source: source.to_string(),
                        model: model.to_string(),
                        reason: "single-class training data".into(),
                    });
                }
                continue;
            }
            let test_classes: std::collections::BTreeSet<usize> =
                test_labels.iter().copied().collect();
            for c in &test_classes {
                if !distinct_train.contains(c) {
                    warnings.push(format!(
                        "class \"{}\" present in test but absent from training",
                        demo.categories[*c]
                    ));
                }
            }
            for c in &distinct_train {
                if !test_classes.contains(c) {
                    warnings.push(format!(
                        "class \"{}\" present in training but absent from test",
                        demo.categories[*c]
                    ));
                }
            }

            for (source, model) in grid {
                let evaluated: Result<(Vec<usize>, Vec<usize>)> = match model {
                    MODEL_LOGREG => {
                        let vectors = sources
                            .iter()
                            .find(|(n, _)| *n == source)
                            .map(|(_, v)| *v)
                            .expect("source exists");
                        let feats = |ids: &[String]| -> Vec<Vec<f64>> {
                            ids.iter()
                                .map(|id| vectors[index_of_id[id.as_str()]].values.clone())
                                .collect()
                        };
                        let train_x = feats(&train_ids);
                        let test_x = feats(&test_ids);
                        train_logreg(
                            &train_x,
                            &train_labels,
                            demo.categories.len(),
                            &cfg.logreg,
                            derive_seed(split_seed, "logreg", &[attr as u64]),
                        )
                        .map(|m| {
                            let preds = test_x.iter().map(|x| m.predict(x)).collect();
                            (preds, test_labels.clone())
                        })
                    }
                    MODEL_MNB => {
                        let feats = |ids: &[String]| -> Vec<Vec<f64>> {
                            ids.iter()
                                .map(|id| inputs.counts[index_of_id[id.as_str()]].clone())
                                .collect()
                        };
                        let train_x = feats(&train_ids);
                        let test_x = feats(&test_ids);
                        train_mnb(&train_x, &train_labels, demo.categories.len(), cfg.mnb_alpha)
                            .map(|m| {
                                let preds = test_x.iter().map(|x| m.predict(x)).collect();
                                (preds, test_labels.clone())
                            })
                    }
                    _ => unreachable!(),
                };
                match evaluated {
                    Ok((preds, truth)) => {
                        let mut correct_item_ids: Vec<String> = preds
                            .iter()
                            .zip(&truth)
                            .zip(&test_ids)
                            .filter(|((p, t), _)| p == t)
                            .map(|(_, id)| id.clone())
                            .collect();
                        correct_item_ids.sort();
                        let accuracy = correct_item_ids.len() as f64 / test_ids.len() as f64;
                        results.push(PredictionTaskResult {
                            cluster,
                            attribute: attr,
                            feature_source: source.to_string(),
                            model: model.to_string(),
                            accuracy,
                            baselines: baselines.clone(),
                            n_train: train_ids.len(),
                            n_test: test_ids.len(),
                            correct_item_ids,
                            split_seed,
                            warnings: warnings.clone(),
                        });
                    }
                    Err(e) => skipped.push(SkippedTask {
                        cluster,
                        attribute: attr,
                        feature_source: source.to_string(),
                        model: model.to_string(),
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }

    Ok(PredictionTasks { results, skipped })
}
