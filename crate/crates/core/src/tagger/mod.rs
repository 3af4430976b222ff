//! Cause/effect span extraction as C/E/O sequence labeling.

mod eval;
mod features;
mod inference;
mod model;
pub mod protocol;
mod spans;
mod train;

use thiserror::Error;

use crate::corpus::Tag;
use crate::text::tokenize;

pub use eval::{
    cross_validate_tagger, evaluate_model, evaluate_tagging, predict_corpus, LabelReport, TaggerCvReport, TaggingReport,
};
pub use features::{extract_features, FeatureTemplate};
pub use inference::{Lattice, Posterior};
pub use model::{CrfModel, TaggerMetadata};
pub use spans::{decode_spans, spans_to_tags, CauseEffectInstance, Span};
pub use train::{nll_and_gradient, token_nll, train_tagger, TaggerConfig};

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("misaligned corpora: {0}")]
    Misaligned(String),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("fold split: {0}")]
    Folds(String),
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn check_pair(tokens: &[String], tags: &[Tag]) -> Result<(), TaggerError> {
    if tokens.is_empty() || tokens.len() != tags.len() {
        return Err(TaggerError::LengthMismatch {
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    Ok(())
}

/// Unnormalized log-score of `tags` for `tokens`.
pub fn score_sequence(model: &CrfModel, tokens: &[String], tags: &[Tag]) -> Result<f64, TaggerError> {
    check_pair(tokens, tags)?;
    Ok(model.lattice(tokens).score(tags))
}

/// Log-partition and per-position label marginals.
pub fn forward_backward(model: &CrfModel, tokens: &[String]) -> Result<(f64, Vec<[f64; 3]>), TaggerError> {
    if tokens.is_empty() {
        return Err(TaggerError::EmptyBatch);
    }
    let p = model.lattice(tokens).forward_backward();
    Ok((p.log_partition, p.unary))
}

/// Best tag sequence; an empty input gives an empty output.
pub fn viterbi(model: &CrfModel, tokens: &[String]) -> Vec<Tag> {
    if tokens.is_empty() {
        return Vec::new();
    }
    model.lattice(tokens).viterbi().0
}

/// Tokenizes a raw narrative and tags it.
pub fn tag(model: &CrfModel, text: &str) -> (Vec<String>, Vec<Tag>) {
    let tokens = tokenize(text);
    let tags = viterbi(model, &tokens);
    (tokens, tags)
}
