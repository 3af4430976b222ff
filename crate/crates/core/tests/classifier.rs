mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cemine_core::classifier::{
    cross_validate, evaluate, stratified_kfold, subsample_negatives, train_classifier, ConfusionCounts, MetricReport,
    TrainConfig,
};
use common::*;

#[test]
fn three_one_one_gives_three_quarters() {
    let r = MetricReport::from_counts(ConfusionCounts {
        true_positive: 3,
        false_positive: 1,
        false_negative: 1,
        true_negative: 0,
    });
    assert_eq!((r.precision, r.recall, r.f1), (0.75, 0.75, 0.75));
}

#[test]
fn metrics_match_rational_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut fixtures: Vec<(u64, u64, u64)> = vec![(0, 0, 0), (0, 4, 0), (0, 0, 4), (5, 0, 0)];
    fixtures.extend((0..40).map(|_| (rng.gen_range(0..500), rng.gen_range(0..500), rng.gen_range(0..500))));
    for (tp, fp, fn_) in fixtures {
        let r = MetricReport::from_counts(ConfusionCounts {
            true_positive: tp,
            false_positive: fp,
            false_negative: fn_,
            true_negative: 7,
        });
        let o = rational_metrics(tp, fp, fn_);
        assert_eq!(r.precision, to_f64(o.precision), "{tp}/{fp}/{fn_}");
        assert_eq!(r.recall, to_f64(o.recall), "{tp}/{fp}/{fn_}");
        assert_eq!(r.f1, to_f64(o.f1), "{tp}/{fp}/{fn_}");
        assert_eq!(r.no_positive_predictions, tp + fp == 0);
        assert_eq!(r.no_positive_gold, tp + fn_ == 0);
    }
}

#[test]
fn training_is_seed_deterministic() {
    let data = separable_corpus(60, 60, &mut ChaCha8Rng::seed_from_u64(3));
    let config = TrainConfig {
        dimension: 1 << 12,
        ..TrainConfig::default()
    };
    let a = train_classifier(&data, &config).unwrap();
    let b = train_classifier(&data, &config).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let ra = cross_validate(&data, 5, 9, &config).unwrap();
    let rb = cross_validate(&data, 5, 9, &config).unwrap();
    assert_eq!(ra, rb);
    let pooled: u64 = ra.folds.iter().map(|f| f.metrics.counts.total()).sum();
    assert_eq!(pooled as usize, data.len());
    assert_eq!(ra.pooled.counts.total() as usize, data.len());
}

#[test]
fn subsampling_keeps_positives_and_exact_negative_count() {
    let data = separable_corpus(40, 200, &mut ChaCha8Rng::seed_from_u64(4));
    for ratio in 1..=3 {
        let s = subsample_negatives(&data, ratio, 11).unwrap();
        assert_eq!(s.iter().filter(|x| x.adas).count(), 40);
        assert_eq!(s.iter().filter(|x| !x.adas).count(), 40 * ratio);
    }
    assert!(subsample_negatives(&data, 6, 11).is_err());
}

proptest! {
    #[test]
    fn f1_is_harmonic_mean(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
        let r = MetricReport::from_counts(ConfusionCounts {
            true_positive: tp,
            false_positive: fp,
            false_negative: fn_,
            true_negative: 0,
        });
        if r.precision + r.recall > 0.0 {
            let h = 2.0 * r.precision * r.recall / (r.precision + r.recall);
            prop_assert!((r.f1 - h).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluate_is_permutation_invariant(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..200),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let (p, g): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (sp, sg): (Vec<bool>, Vec<bool>) = shuffled.into_iter().unzip();
        prop_assert_eq!(evaluate(&p, &g).unwrap(), evaluate(&sp, &sg).unwrap());
    }

    #[test]
    fn stratified_folds_partition_and_balance(
        labels in prop::collection::vec(0u8..3, 10..300),
        k in 2usize..11,
        seed in any::<u64>(),
    ) {
        let smallest = (0..3u8)
            .map(|c| labels.iter().filter(|&&l| l == c).count())
            .filter(|&n| n > 0)
            .min()
            .unwrap();
        if smallest < k {
            prop_assert!(stratified_kfold(&labels, k, seed).is_err());
            return Ok(());
        }
        let folds = stratified_kfold(&labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..labels.len()).collect::<Vec<_>>());
        for class in 0..3u8 {
            let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == class).count()).collect();
            let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "class {class}: {per:?}");
        }
        prop_assert_eq!(stratified_kfold(&labels, k, seed).unwrap(), folds);
    }
}
