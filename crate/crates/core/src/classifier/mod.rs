//! Binary ADAS / non-ADAS narrative classifier.
//!
//! Narratives are featurized by hashing token unigrams and adjacent bigrams
//! into a fixed power-of-two space and fit with L2-regularized logistic
//! regression by shuffled mini-batch SGD. The cross-validation harness
//! pools confusion counts across folds.

mod folds;
mod metrics;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::derive_seed;
use crate::text::tokenize;

pub use folds::{kfold, stratified_kfold, subsample_negatives};
pub use metrics::{evaluate, ConfusionCounts, LengthMismatch, MacroAverage, MetricReport};

pub const DEFAULT_DIMENSION: usize = 1 << 18;
const MODEL_FORMAT: &str = "cemine-linear";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("degenerate training set: both classes are required")]
    DegenerateTrainingSet,
    #[error("dimension {0} is not a power of two")]
    BadDimension(usize),
    #[error("model dimension {model} does not match feature dimension {features}")]
    DimensionMismatch { model: usize, features: usize },
    #[error("k-fold needs k >= 2, got {0}")]
    TooFewFolds(usize),
    #[error("a class has {size} members, fewer than k = {k}")]
    ClassTooSmall { size: usize, k: usize },
    #[error("negative ratio must be at least 1")]
    BadRatio,
    #[error("need {wanted} negatives but only {available} are available")]
    InsufficientNegatives { wanted: usize, available: usize },
    #[error("unsupported model file {0:?}")]
    BadModelFile(String),
    #[error(transparent)]
    Length(#[from] LengthMismatch),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One labeled narrative. `adas` is the positive class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub id: String,
    pub text: String,
    pub adas: bool,
}

/// Sorted, duplicate-free (index, weight) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatureVector {
    dimension: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseFeatureVector {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * dense[i as usize]).sum()
    }
}

/// FNV-1a, 64-bit.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Hashed slot of a feature string (`u:<token>` or `b:<token> <token>`).
pub fn feature_index(feature: &str, dimension: usize) -> u32 {
    (fnv1a(feature.as_bytes()) & (dimension as u64 - 1)) as u32
}

/// Unigram and adjacent-bigram feature strings of `text`, with repetition.
pub fn feature_strings(text: &str) -> Vec<String> {
    let tokens = tokenize(text);
    let mut out: Vec<String> = tokens.iter().map(|t| format!("u:{t}")).collect();
    out.extend(tokens.windows(2).map(|w| format!("b:{} {}", w[0], w[1])));
    out
}

pub fn featurize(text: &str, dimension: usize) -> Result<SparseFeatureVector, ClassifierError> {
    if !dimension.is_power_of_two() {
        return Err(ClassifierError::BadDimension(dimension));
    }
    let mut indices: Vec<u32> = feature_strings(text)
        .iter()
        .map(|f| feature_index(f, dimension))
        .collect();
    indices.sort_unstable();
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for i in indices {
        match entries.last_mut() {
            Some((last, w)) if *last == i => *w += 1.0,
            _ => entries.push((i, 1.0)),
        }
    }
    let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut entries {
            *w /= norm;
        }
    }
    Ok(SparseFeatureVector { dimension, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dimension: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            epochs: 8,
            learning_rate: 0.1,
            l2: 1e-6,
            batch_size: 32,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    /// Regularized mean loss over the training set after each epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    dimension: usize,
    bias: f64,
    weights: Vec<(u32, f64)>,
    metadata: TrainingMetadata,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z), stable for large |z|.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn target(adas: bool) -> f64 {
    if adas {
        1.0
    } else {
        0.0
    }
}

impl LinearClassifier {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            weights: vec![0.0; dimension],
            bias: 0.0,
            metadata: TrainingMetadata {
                seed: 0,
                epochs: 0,
                learning_rate: 0.0,
                l2: 0.0,
                batch_size: 0,
                epoch_losses: Vec::new(),
            },
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &SparseFeatureVector) -> Result<f64, ClassifierError> {
        if x.dimension() != self.dimension() {
            return Err(ClassifierError::DimensionMismatch {
                model: self.dimension(),
                features: x.dimension(),
            });
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    /// Probability of the ADAS class and the thresholded label (≥ 0.5).
    pub fn predict(&self, text: &str) -> Result<(f64, bool), ClassifierError> {
        let x = featurize(text, self.dimension())?;
        let p = sigmoid(self.decision(&x)?);
        Ok((p, p >= 0.5))
    }

    /// Mean logistic loss over `data` plus `l2 / 2 · ‖w‖²` (bias unpenalized).
    pub fn regularized_loss(&self, data: &[(SparseFeatureVector, bool)], l2: f64) -> f64 {
        let data_loss: f64 = data
            .iter()
            .map(|(x, y)| {
                let z = x.dot(&self.weights) + self.bias;
                softplus(z) - target(*y) * z
            })
            .sum::<f64>()
            / data.len().max(1) as f64;
        data_loss + 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient of [`Self::regularized_loss`] as (dense weight gradient, bias gradient).
    pub fn regularized_gradient(&self, data: &[(SparseFeatureVector, bool)], l2: f64) -> (Vec<f64>, f64) {
        let n = data.len().max(1) as f64;
        let mut grad: Vec<f64> = self.weights.iter().map(|w| l2 * w).collect();
        let mut grad_bias = 0.0;
        for (x, y) in data {
            let residual = (sigmoid(x.dot(&self.weights) + self.bias) - target(*y)) / n;
            for &(i, v) in x.entries() {
                grad[i as usize] += residual * v;
            }
            grad_bias += residual;
        }
        (grad, grad_bias)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            dimension: self.dimension(),
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(ClassifierError::BadModelFile(format!("{} v{}", file.format, file.version)));
        }
        if !file.dimension.is_power_of_two() {
            return Err(ClassifierError::BadDimension(file.dimension));
        }
        let mut weights = vec![0.0; file.dimension];
        for (i, w) in file.weights {
            let slot = weights
                .get_mut(i as usize)
                .ok_or_else(|| ClassifierError::BadModelFile(format!("weight index {i} out of range")))?;
            *slot = w;
        }
        Ok(Self {
            weights,
            bias: file.bias,
            metadata: file.metadata,
        })
    }
}

/// Featurizes a labeled set once.
pub fn featurize_all(data: &[LabeledText], dimension: usize) -> Result<Vec<(SparseFeatureVector, bool)>, ClassifierError> {
    data.iter()
        .map(|d| Ok((featurize(&d.text, dimension)?, d.adas)))
        .collect()
}

pub fn train_classifier(train: &[LabeledText], config: &TrainConfig) -> Result<LinearClassifier, ClassifierError> {
    let data = featurize_all(train, config.dimension)?;
    train_on_features(&data, config)
}

/// Shuffled mini-batch SGD on [`LinearClassifier::regularized_loss`].
///
/// Weights are stored as `scale · v` so the L2 shrink of every step is a
/// single multiply instead of a pass over all `dimension` weights.
pub fn train_on_features(data: &[(SparseFeatureVector, bool)], config: &TrainConfig) -> Result<LinearClassifier, ClassifierError> {
    if !config.dimension.is_power_of_two() {
        return Err(ClassifierError::BadDimension(config.dimension));
    }
    let positives = data.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == data.len() {
        return Err(ClassifierError::DegenerateTrainingSet);
    }
    if let Some((x, _)) = data.iter().find(|(x, _)| x.dimension() != config.dimension) {
        return Err(ClassifierError::DimensionMismatch {
            model: config.dimension,
            features: x.dimension(),
        });
    }

    let mut model = LinearClassifier::zeros(config.dimension);
    model.metadata = TrainingMetadata {
        seed: config.seed,
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        l2: config.l2,
        batch_size: config.batch_size,
        epoch_losses: Vec::with_capacity(config.epochs),
    };
    let lr = config.learning_rate;
    let batch_size = config.batch_size.max(1);
    let shrink = 1.0 - lr * config.l2;
    let mut v = vec![0.0; config.dimension];
    let mut scale = 1.0;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut residuals = Vec::with_capacity(batch_size);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            residuals.clear();
            for &i in batch {
                let (x, y) = &data[i];
                let z = scale * x.dot(&v) + model.bias;
                residuals.push(sigmoid(z) - target(*y));
            }
            let step = lr / batch.len() as f64;
            scale *= shrink;
            for (&i, r) in batch.iter().zip(&residuals) {
                for &(j, xv) in data[i].0.entries() {
                    v[j as usize] -= step * r * xv / scale;
                }
            }
            model.bias -= step * residuals.iter().sum::<f64>();
            if scale < 1e-6 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        model.weights.iter_mut().zip(&v).for_each(|(w, vi)| *w = scale * vi);
        let loss = model.regularized_loss(data, config.l2);
        model.metadata.epoch_losses.push(loss);
    }
    model.weights.iter_mut().zip(&v).for_each(|(w, vi)| *w = scale * vi);
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub dataset_size: usize,
    pub positives: usize,
    pub negatives: usize,
    pub folds: Vec<FoldReport>,
    /// Metrics over confusion counts pooled across folds.
    pub pooled: MetricReport,
    pub macro_average: MacroAverage,
}

/// Stratified k-fold cross validation. Folds train in parallel; each fold's
/// SGD seed is derived from `seed` so results do not depend on scheduling.
pub fn cross_validate(data: &[LabeledText], k: usize, seed: u64, config: &TrainConfig) -> Result<CvReport, ClassifierError> {
    let labels: Vec<bool> = data.iter().map(|d| d.adas).collect();
    let folds = stratified_kfold(&labels, k, seed)?;
    let features = featurize_all(data, config.dimension)?;

    let fold_reports = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let mut in_test = vec![false; data.len()];
            test_idx.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<(SparseFeatureVector, bool)> = features
                .iter()
                .zip(&in_test)
                .filter(|(_, t)| !**t)
                .map(|(x, _)| x.clone())
                .collect();
            let fold_config = TrainConfig {
                seed: derive_seed(seed, &format!("fold-{f}")),
                ..config.clone()
            };
            let model = train_on_features(&train, &fold_config)?;
            let mut counts = ConfusionCounts::default();
            for &i in test_idx {
                let (x, y) = &features[i];
                let predicted = sigmoid(model.decision(x)?) >= 0.5;
                counts.record(predicted, *y);
            }
            Ok(FoldReport {
                fold: f,
                train_size: train.len(),
                test_size: test_idx.len(),
                metrics: MetricReport::from_counts(counts),
            })
        })
        .collect::<Result<Vec<_>, ClassifierError>>()?;

    let mut pooled = ConfusionCounts::default();
    fold_reports.iter().for_each(|f| pooled.merge(&f.metrics.counts));
    let positives = labels.iter().filter(|&&l| l).count();
    Ok(CvReport {
        k,
        seed,
        dataset_size: data.len(),
        positives,
        negatives: data.len() - positives,
        macro_average: MacroAverage::of(fold_reports.iter().map(|f| &f.metrics)),
        pooled: MetricReport::from_counts(pooled),
        folds: fold_reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(id: &str, text: &str, adas: bool) -> LabeledText {
        LabeledText {
            id: id.into(),
            text: text.into(),
            adas,
        }
    }

    #[test]
    fn featurize_basics() {
        let a = featurize("Brake failed", 1 << 10).unwrap();
        assert_eq!(a, featurize("Brake failed", 1 << 10).unwrap());
        let empty = featurize("", 1 << 10).unwrap();
        assert!(empty.entries().is_empty());
        assert!(matches!(featurize("x", 1000), Err(ClassifierError::BadDimension(1000))));
        let norm: f64 = a.entries().iter().map(|(_, w)| w * w).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_model_predicts_half() {
        let model = LinearClassifier::zeros(1 << 8);
        assert_eq!(model.predict("anything at all").unwrap(), (0.5, true));
    }

    #[test]
    fn increasing_bias_never_lowers_probability() {
        let mut model = LinearClassifier::zeros(1 << 8);
        model.weights[3] = -0.7;
        let mut last = 0.0;
        for b in -20..=20 {
            model.bias = b as f64 * 0.5;
            let (p, _) = model.predict("brake brake sensor").unwrap();
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn dimension_mismatch() {
        let model = LinearClassifier::zeros(1 << 8);
        let x = featurize("a", 1 << 9).unwrap();
        assert!(matches!(model.decision(&x), Err(ClassifierError::DimensionMismatch { .. })));
    }

    #[test]
    fn single_class_rejected() {
        let data = [labeled("1", "a", true), labeled("2", "b", true)];
        assert!(matches!(
            train_classifier(&data, &TrainConfig::default()),
            Err(ClassifierError::DegenerateTrainingSet)
        ));
    }

    #[test]
    fn separable_pair_loss_decreases() {
        let data = [labeled("1", "autopilot", true), labeled("2", "radio", false)];
        let config = TrainConfig {
            dimension: 1 << 10,
            epochs: 30,
            learning_rate: 0.05,
            l2: 0.0,
            batch_size: 2,
            seed: 1,
        };
        let model = train_classifier(&data, &config).unwrap();
        let losses = &model.metadata.epoch_losses;
        assert_eq!(losses.len(), 30);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        assert!(model.predict("autopilot").unwrap().1);
        assert!(!model.predict("radio").unwrap().1);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data: Vec<_> = (0..40)
            .map(|i| labeled(&i.to_string(), if i % 2 == 0 { "lane keep assist" } else { "window motor" }, i % 2 == 0))
            .collect();
        let config = TrainConfig {
            dimension: 1 << 12,
            ..TrainConfig::default()
        };
        let a = train_classifier(&data, &config).unwrap();
        let b = train_classifier(&data, &config).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.to_json(), b.to_json());
        let c = train_classifier(&data, &TrainConfig { seed: 99, ..config }).unwrap();
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn model_file_round_trip() {
        let mut model = LinearClassifier::zeros(1 << 6);
        model.weights[5] = 0.25;
        model.bias = -1.5;
        let back = LinearClassifier::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        let bad = model.to_json().replace("cemine-linear", "other");
        assert!(matches!(LinearClassifier::from_json(&bad), Err(ClassifierError::BadModelFile(_))));
    }
}
