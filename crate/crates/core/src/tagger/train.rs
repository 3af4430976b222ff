use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureTemplate};
use super::model::{CrfModel, TaggerMetadata, LABELS};
use super::TaggerError;
use crate::corpus::AnnotatedSentence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub templates: Vec<FeatureTemplate>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            templates: FeatureTemplate::default_set(),
            epochs: 30,
            learning_rate: 0.05,
            l2: 1e-4,
            batch_size: 8,
            seed: 7,
        }
    }
}

/// A sentence reduced to model feature rows and gold label indices.
pub(crate) struct Prepared {
    ids: Vec<Vec<usize>>,
    gold: Vec<usize>,
}

impl Prepared {
    pub(crate) fn new(model: &CrfModel, sentence: &AnnotatedSentence) -> Self {
        Self {
            ids: model.feature_ids(&sentence.tokens),
            gold: sentence.tags.iter().map(|t| t.index()).collect(),
        }
    }
}

/// Adds this sentence's NLL gradient (expected minus empirical counts) into
/// `grad`, laid out like [`CrfModel::parameters`], and returns its NLL.
fn accumulate(model: &CrfModel, sentence: &Prepared, grad: &mut [f64]) -> f64 {
    let lattice = model.lattice_from_ids(&sentence.ids);
    let posterior = lattice.forward_backward();
    let gold = &sentence.gold;
    let n = gold.len();

    let mut gold_score = model.start[gold[0]] + model.stop[gold[n - 1]];
    for i in 0..n {
        gold_score += lattice.emissions[i][gold[i]];
        if i + 1 < n {
            gold_score += model.transition[gold[i]][gold[i + 1]];
        }
    }

    let trans_offset = model.emission.len() * LABELS;
    let start_offset = trans_offset + LABELS * LABELS;
    let stop_offset = start_offset + LABELS;

    for (i, row) in sentence.ids.iter().enumerate() {
        for &id in row {
            let base = id * LABELS;
            for y in 0..LABELS {
                grad[base + y] += posterior.unary[i][y];
            }
            grad[base + gold[i]] -= 1.0;
        }
    }
    for (i, pair) in posterior.pairwise.iter().enumerate() {
        for x in 0..LABELS {
            for y in 0..LABELS {
                grad[trans_offset + x * LABELS + y] += pair[x][y];
            }
        }
        grad[trans_offset + gold[i] * LABELS + gold[i + 1]] -= 1.0;
    }
    for y in 0..LABELS {
        grad[start_offset + y] += posterior.unary[0][y];
        grad[stop_offset + y] += posterior.unary[n - 1][y];
    }
    grad[start_offset + gold[0]] -= 1.0;
    grad[stop_offset + gold[n - 1]] -= 1.0;

    posterior.log_partition - gold_score
}

/// Summed negative log-likelihood of `batch` plus `l2 / 2 · ‖w‖²`, and its
/// gradient in [`CrfModel::parameters`] order. Features missing from the
/// model's table are ignored.
pub fn nll_and_gradient(model: &CrfModel, batch: &[AnnotatedSentence], l2: f64) -> Result<(f64, Vec<f64>), TaggerError> {
    if batch.is_empty() {
        return Err(TaggerError::EmptyBatch);
    }
    let params = model.parameters();
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for s in batch {
        check_shape(s)?;
        loss += accumulate(model, &Prepared::new(model, s), &mut grad);
    }
    loss += 0.5 * l2 * params.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad.iter_mut().zip(&params) {
        *g += l2 * w;
    }
    Ok((loss, grad))
}

pub(crate) fn check_shape(s: &AnnotatedSentence) -> Result<(), TaggerError> {
    if s.tokens.is_empty() || s.tokens.len() != s.tags.len() {
        return Err(TaggerError::LengthMismatch {
            tokens: s.tokens.len(),
            tags: s.tags.len(),
        });
    }
    Ok(())
}

/// Mean per-sentence NLL over `data` plus the L2 term.
fn objective(model: &CrfModel, data: &[Prepared], l2: f64) -> f64 {
    let mut scratch = vec![0.0; model.parameter_count()];
    let nll: f64 = data.iter().map(|p| accumulate(model, p, &mut scratch)).sum();
    nll / data.len() as f64 + 0.5 * l2 * model.squared_norm()
}

/// Fits a CRF by mini-batch SGD. Each step follows the batch-mean NLL
/// gradient plus `l2 · w`; the sentence order is reshuffled every epoch from
/// a generator seeded once with `config.seed`.
pub fn train_tagger(corpus: &[AnnotatedSentence], config: &TaggerConfig) -> Result<CrfModel, TaggerError> {
    if corpus.is_empty() {
        return Err(TaggerError::EmptyCorpus);
    }
    let mut model = CrfModel::new(config.templates.clone());
    for s in corpus {
        check_shape(s)?;
        for position in extract_features(&config.templates, &s.tokens) {
            for f in position {
                model.intern(&f);
            }
        }
    }
    let data: Vec<Prepared> = corpus.iter().map(|s| Prepared::new(&model, s)).collect();

    model.metadata = TaggerMetadata {
        seed: config.seed,
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        l2: config.l2,
        batch_size: config.batch_size,
        epoch_losses: Vec::with_capacity(config.epochs),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; model.parameter_count()];
    let batch_size = config.batch_size.max(1);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                accumulate(&model, &data[i], &mut grad);
            }
            let inv = 1.0 / batch.len() as f64;
            apply_step(&mut model, &grad, inv, config.learning_rate, config.l2);
        }
        let loss = objective(&model, &data, config.l2);
        model.metadata.epoch_losses.push(loss);
    }
    Ok(model)
}

/// `w ← w − lr · (scale · g + l2 · w)` over every parameter.
fn apply_step(model: &mut CrfModel, grad: &[f64], scale: f64, lr: f64, l2: f64) {
    let mut g = grad.iter();
    let mut update = |w: &mut f64| {
        let gi = *g.next().expect("gradient covers every parameter");
        *w -= lr * (scale * gi + l2 * *w);
    };
    for row in &mut model.emission {
        row.iter_mut().for_each(&mut update);
    }
    for row in &mut model.transition {
        row.iter_mut().for_each(&mut update);
    }
    model.start.iter_mut().for_each(&mut update);
    model.stop.iter_mut().for_each(&mut update);
}

/// Mean per-token negative log marginal probability of the gold tags.
pub fn token_nll(model: &CrfModel, corpus: &[AnnotatedSentence]) -> Result<f64, TaggerError> {
    let mut total = 0.0;
    let mut tokens = 0usize;
    for s in corpus {
        check_shape(s)?;
        let posterior = model.lattice(&s.tokens).forward_backward();
        for (row, tag) in posterior.unary.iter().zip(&s.tags) {
            total -= row[tag.index()].max(f64::MIN_POSITIVE).ln();
        }
        tokens += s.tokens.len();
    }
    if tokens == 0 {
        return Err(TaggerError::EmptyCorpus);
    }
    Ok(total / tokens as f64)
}
