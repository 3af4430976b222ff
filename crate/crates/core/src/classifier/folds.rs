//! Fold assignment and negative subsampling.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClassifierError, LabeledText};

/// Splits sample indices into `k` folds so that each class is spread evenly:
/// per-class counts across folds differ by at most one. Each fold's indices
/// are returned sorted.
pub fn stratified_kfold<L: Ord + Clone>(labels: &[L], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ClassifierError> {
    if k < 2 {
        return Err(ClassifierError::TooFewFolds(k));
    }
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        by_class.entry(label.clone()).or_default().push(i);
    }
    if let Some(smallest) = by_class.values().map(Vec::len).min() {
        if smallest < k {
            return Err(ClassifierError::ClassTooSmall { size: smallest, k });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    // rotating start keeps total fold sizes balanced across classes
    let mut offset = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for (j, &idx) in members.iter().enumerate() {
            folds[(offset + j) % k].push(idx);
        }
        offset = (offset + members.len()) % k;
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Unstratified shuffled k-fold split.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ClassifierError> {
    if k < 2 {
        return Err(ClassifierError::TooFewFolds(k));
    }
    if n < k {
        return Err(ClassifierError::ClassTooSmall { size: n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (j, idx) in order.into_iter().enumerate() {
        folds[j % k].push(idx);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Keeps every positive and `ratio` × #positives negatives drawn uniformly
/// without replacement. Original relative order is preserved.
pub fn subsample_negatives(dataset: &[LabeledText], ratio: usize, seed: u64) -> Result<Vec<LabeledText>, ClassifierError> {
    if ratio == 0 {
        return Err(ClassifierError::BadRatio);
    }
    let negatives: Vec<usize> = (0..dataset.len()).filter(|&i| !dataset[i].adas).collect();
    let positives = dataset.len() - negatives.len();
    let wanted = ratio * positives;
    if wanted > negatives.len() {
        return Err(ClassifierError::InsufficientNegatives {
            wanted,
            available: negatives.len(),
        });
    }
    let mut keep = vec![false; dataset.len()];
    for (i, item) in dataset.iter().enumerate() {
        keep[i] = item.adas;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for pick in index::sample(&mut rng, negatives.len(), wanted) {
        keep[negatives[pick]] = true;
    }
    Ok(dataset
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(item, _)| item.clone())
        .collect())
}
