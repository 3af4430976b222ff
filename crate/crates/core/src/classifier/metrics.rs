use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

impl ConfusionCounts {
    pub fn from_pairs(predictions: &[bool], gold: &[bool]) -> Result<Self, LengthMismatch> {
        if predictions.len() != gold.len() {
            return Err(LengthMismatch {
                predictions: predictions.len(),
                gold: gold.len(),
            });
        }
        let mut c = ConfusionCounts::default();
        for (&p, &g) in predictions.iter().zip(gold) {
            c.record(p, g);
        }
        Ok(c)
    }

    pub fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.true_positive += 1,
            (true, false) => self.false_positive += 1,
            (false, true) => self.false_negative += 1,
            (false, false) => self.true_negative += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.true_positive += other.true_positive;
        self.false_positive += other.false_positive;
        self.false_negative += other.false_negative;
        self.true_negative += other.true_negative;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{predictions} predictions for {gold} gold labels")]
pub struct LengthMismatch {
    pub predictions: usize,
    pub gold: usize,
}

/// Precision, recall and F1 for the positive class.
///
/// Zero denominators resolve to 0 and raise the matching flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
    pub no_positive_predictions: bool,
    pub no_positive_gold: bool,
}

impl MetricReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let tp = counts.true_positive;
        let predicted = tp + counts.false_positive;
        let actual = tp + counts.false_negative;
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN); the count form avoids compounding rounding.
        let f1 = if tp == 0 {
            0.0
        } else {
            ratio(2 * tp, 2 * tp + counts.false_positive + counts.false_negative)
        };
        MetricReport {
            precision: ratio(tp, predicted),
            recall: ratio(tp, actual),
            f1,
            counts,
            no_positive_predictions: predicted == 0,
            no_positive_gold: actual == 0,
        }
    }
}

pub fn evaluate(predictions: &[bool], gold: &[bool]) -> Result<MetricReport, LengthMismatch> {
    Ok(MetricReport::from_counts(ConfusionCounts::from_pairs(predictions, gold)?))
}

/// Unweighted mean of per-fold (or per-label) scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MacroAverage {
    pub fn of<'a>(reports: impl IntoIterator<Item = &'a MetricReport>) -> Self {
        let mut avg = MacroAverage::default();
        let mut n = 0usize;
        for r in reports {
            avg.precision += r.precision;
            avg.recall += r.recall;
            avg.f1 += r.f1;
            n += 1;
        }
        if n > 0 {
            let n = n as f64;
            avg.precision /= n;
            avg.recall /= n;
            avg.f1 /= n;
        }
        avg
    }
}
