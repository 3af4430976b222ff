//! Exact inference on a linear chain of three labels, in log space.
#![allow(clippy::needless_range_loop)]

use super::model::LABELS;
use crate::corpus::Tag;

/// Per-position label scores plus the chain potentials they are combined with.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub emissions: Vec<[f64; LABELS]>,
    pub transition: [[f64; LABELS]; LABELS],
    pub start: [f64; LABELS],
    pub stop: [f64; LABELS],
}

/// Output of the forward-backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// log Z from the forward recursion.
    pub log_partition: f64,
    /// log Z recomputed from the backward recursion.
    pub log_partition_backward: f64,
    /// `unary[i][y] = P(tag_i = y)`.
    pub unary: Vec<[f64; LABELS]>,
    /// `pairwise[i][x][y] = P(tag_i = x, tag_{i+1} = y)`.
    pub pairwise: Vec<[[f64; LABELS]; LABELS]>,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Index of the first maximal element; earlier labels win ties.
fn argmax_first(values: &[f64; LABELS]) -> usize {
    let mut best = 0;
    for y in 1..LABELS {
        if values[y] > values[best] {
            best = y;
        }
    }
    best
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.emissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    /// Unnormalized log-score of one tag sequence. `tags.len()` must equal `self.len()`.
    pub fn score(&self, tags: &[Tag]) -> f64 {
        debug_assert_eq!(tags.len(), self.len());
        let Some(first) = tags.first() else {
            return 0.0;
        };
        let mut s = self.start[first.index()] + self.stop[tags[tags.len() - 1].index()];
        for (i, t) in tags.iter().enumerate() {
            s += self.emissions[i][t.index()];
        }
        for w in tags.windows(2) {
            s += self.transition[w[0].index()][w[1].index()];
        }
        s
    }

    pub fn forward_backward(&self) -> Posterior {
        let n = self.len();
        assert!(n > 0, "forward-backward needs at least one position");
        let mut alpha = vec![[0.0; LABELS]; n];
        for y in 0..LABELS {
            alpha[0][y] = self.start[y] + self.emissions[0][y];
        }
        for i in 1..n {
            for y in 0..LABELS {
                let incoming: [f64; LABELS] = std::array::from_fn(|x| alpha[i - 1][x] + self.transition[x][y]);
                alpha[i][y] = log_sum_exp(&incoming) + self.emissions[i][y];
            }
        }
        let closing: [f64; LABELS] = std::array::from_fn(|y| alpha[n - 1][y] + self.stop[y]);
        let log_partition = log_sum_exp(&closing);

        let mut beta = vec![[0.0; LABELS]; n];
        beta[n - 1] = self.stop;
        for i in (0..n - 1).rev() {
            for x in 0..LABELS {
                let outgoing: [f64; LABELS] =
                    std::array::from_fn(|y| self.transition[x][y] + self.emissions[i + 1][y] + beta[i + 1][y]);
                beta[i][x] = log_sum_exp(&outgoing);
            }
        }
        let opening: [f64; LABELS] = std::array::from_fn(|y| self.start[y] + self.emissions[0][y] + beta[0][y]);
        let log_partition_backward = log_sum_exp(&opening);

        let unary = (0..n)
            .map(|i| std::array::from_fn(|y| (alpha[i][y] + beta[i][y] - log_partition).exp()))
            .collect();
        let pairwise = (0..n.saturating_sub(1))
            .map(|i| {
                std::array::from_fn(|x| {
                    std::array::from_fn(|y| {
                        (alpha[i][x] + self.transition[x][y] + self.emissions[i + 1][y] + beta[i + 1][y]
                            - log_partition)
                            .exp()
                    })
                })
            })
            .collect();
        Posterior {
            log_partition,
            log_partition_backward,
            unary,
            pairwise,
        }
    }

    /// Highest-scoring tag sequence and its score.
    ///
    /// A max-product pass runs right to left; decoding then walks left to
    /// right choosing, at each position, the first label in `C, E, O` order
    /// that still attains the optimum. Among tied optima this returns the
    /// lexicographically smallest sequence.
    pub fn viterbi(&self) -> (Vec<Tag>, f64) {
        let n = self.len();
        assert!(n > 0, "viterbi needs at least one position");
        let mut best_suffix = vec![[0.0; LABELS]; n];
        best_suffix[n - 1] = self.stop;
        for i in (0..n - 1).rev() {
            for x in 0..LABELS {
                best_suffix[i][x] = (0..LABELS)
                    .map(|y| self.transition[x][y] + self.emissions[i + 1][y] + best_suffix[i + 1][y])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        let opening: [f64; LABELS] =
            std::array::from_fn(|y| self.start[y] + self.emissions[0][y] + best_suffix[0][y]);
        let mut prev = argmax_first(&opening);
        let best = opening[prev];
        let mut path = Vec::with_capacity(n);
        path.push(Tag::from_index(prev));
        for i in 1..n {
            let step: [f64; LABELS] =
                std::array::from_fn(|y| self.transition[prev][y] + self.emissions[i][y] + best_suffix[i][y]);
            prev = argmax_first(&step);
            path.push(Tag::from_index(prev));
        }
        (path, best)
    }
}
