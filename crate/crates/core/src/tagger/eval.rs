use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{check_shape, token_nll, train_tagger, TaggerConfig};
use super::{CrfModel, TaggerError};
use crate::classifier::{kfold, ConfusionCounts, MacroAverage, MetricReport};
use crate::corpus::{AnnotatedSentence, Tag};
use crate::digest::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: Tag,
    pub metrics: MetricReport,
}

/// Token-level one-vs-rest scores for each of C, E, O and their macro mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingReport {
    pub tokens: usize,
    pub per_label: Vec<LabelReport>,
    pub macro_average: MacroAverage,
    /// Mean per-token NLL of the gold tags; absent for hard-tag predictors.
    pub loss: Option<f64>,
}

impl TaggingReport {
    fn from_counts(counts: [ConfusionCounts; 3], loss: Option<f64>) -> Self {
        let per_label: Vec<LabelReport> = Tag::ALL
            .iter()
            .zip(counts)
            .map(|(&label, c)| LabelReport {
                label,
                metrics: MetricReport::from_counts(c),
            })
            .collect();
        TaggingReport {
            tokens: counts[0].total() as usize,
            macro_average: MacroAverage::of(per_label.iter().map(|l| &l.metrics)),
            per_label,
            loss,
        }
    }

    pub fn label(&self, tag: Tag) -> &MetricReport {
        &self.per_label[tag.index()].metrics
    }

    fn counts(&self) -> [ConfusionCounts; 3] {
        std::array::from_fn(|i| self.per_label[i].metrics.counts)
    }
}

fn label_counts(predicted: &[AnnotatedSentence], gold: &[AnnotatedSentence]) -> Result<[ConfusionCounts; 3], TaggerError> {
    if predicted.len() != gold.len() {
        return Err(TaggerError::Misaligned(format!(
            "{} predicted sentences for {} gold",
            predicted.len(),
            gold.len()
        )));
    }
    let mut counts = [ConfusionCounts::default(); 3];
    for (p, g) in predicted.iter().zip(gold) {
        check_shape(p)?;
        check_shape(g)?;
        if p.tokens != g.tokens {
            return Err(TaggerError::Misaligned(format!(
                "sentence {:?} differs from gold {:?}",
                p.sentence_id, g.sentence_id
            )));
        }
        for (&pt, &gt) in p.tags.iter().zip(&g.tags) {
            for label in Tag::ALL {
                counts[label.index()].record(pt == label, gt == label);
            }
        }
    }
    Ok(counts)
}

pub fn evaluate_tagging(predicted: &[AnnotatedSentence], gold: &[AnnotatedSentence]) -> Result<TaggingReport, TaggerError> {
    Ok(TaggingReport::from_counts(label_counts(predicted, gold)?, None))
}

/// Decodes `gold` with `model` and scores the result, including the loss.
pub fn evaluate_model(model: &CrfModel, gold: &[AnnotatedSentence]) -> Result<TaggingReport, TaggerError> {
    let predicted = predict_corpus(model, gold);
    let counts = label_counts(&predicted, gold)?;
    Ok(TaggingReport::from_counts(counts, Some(token_nll(model, gold)?)))
}

/// Copies of `corpus` with tags replaced by Viterbi predictions.
pub fn predict_corpus(model: &CrfModel, corpus: &[AnnotatedSentence]) -> Vec<AnnotatedSentence> {
    corpus
        .par_iter()
        .map(|s| AnnotatedSentence {
            tags: model.lattice(&s.tokens).viterbi().0,
            ..s.clone()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerCvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<TaggingReport>,
    /// Counts pooled over all held-out tokens; loss is token-weighted.
    pub pooled: TaggingReport,
}

/// Shuffled k-fold cross validation of the CRF.
pub fn cross_validate_tagger(
    corpus: &[AnnotatedSentence],
    k: usize,
    seed: u64,
    config: &TaggerConfig,
) -> Result<TaggerCvReport, TaggerError> {
    let folds = kfold(corpus.len(), k, seed).map_err(|e| TaggerError::Folds(e.to_string()))?;
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let mut in_test = vec![false; corpus.len()];
            test_idx.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<AnnotatedSentence> = corpus
                .iter()
                .zip(&in_test)
                .filter(|(_, t)| !**t)
                .map(|(s, _)| s.clone())
                .collect();
            let test: Vec<AnnotatedSentence> = test_idx.iter().map(|&i| corpus[i].clone()).collect();
            let fold_config = TaggerConfig {
                seed: derive_seed(seed, &format!("fold-{f}")),
                ..config.clone()
            };
            let model = train_tagger(&train, &fold_config)?;
            evaluate_model(&model, &test)
        })
        .collect::<Result<Vec<_>, TaggerError>>()?;

    let mut pooled = [ConfusionCounts::default(); 3];
    let mut weighted_loss = 0.0;
    for r in &reports {
        for (acc, c) in pooled.iter_mut().zip(r.counts()) {
            acc.merge(&c);
        }
        weighted_loss += r.loss.unwrap_or(0.0) * r.tokens as f64;
    }
    let total = pooled[0].total() as f64;
    Ok(TaggerCvReport {
        k,
        seed,
        pooled: TaggingReport::from_counts(pooled, Some(weighted_loss / total)),
        folds: reports,
    })
}
