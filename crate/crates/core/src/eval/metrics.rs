use serde::{Deserialize, Serialize};

use super::EvalError;

/// Truth scores (higher = more likely true) with their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    /// `true` = Supported.
    pub labels: Vec<bool>,
    pub method_name: String,
}

impl ScoredSet {
    pub fn new(method_name: impl Into<String>, scores: Vec<f64>, labels: Vec<bool>) -> Result<Self, EvalError> {
        if scores.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                left: scores.len(),
                right: labels.len(),
            });
        }
        if scores.len() < 2 {
            return Err(EvalError::TooFew {
                needed: 2,
                got: scores.len(),
            });
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(EvalError::NonFinite);
        }
        Ok(Self {
            scores,
            labels,
            method_name: method_name.into(),
        })
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn n_neg(&self) -> usize {
        self.labels.len() - self.n_pos()
    }

    /// Indices sorted by ascending score.
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]));
        idx
    }
}

/// Mann-Whitney AUROC via midrank rank sums; ties earn half credit.
pub fn auroc(set: &ScoredSet) -> Result<f64, EvalError> {
    let (n_pos, n_neg) = (set.n_pos(), set.n_neg());
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let order = set.order();
    // Twice the positive rank sum keeps midranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && set.scores[order[j + 1]] == set.scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the midrank (i + j + 2) / 2
        let twice_mid = (i + j + 2) as u128;
        let pos_here = order[i..=j].iter().filter(|&&k| set.labels[k]).count() as u128;
        twice_rank_sum += twice_mid * pos_here;
        i = j + 1;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * q) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Best accuracy over all cut points (oracle-threshold accuracy).
    #[default]
    OracleBest,
    /// Predict true when `score >= tau`.
    Fixed(f64),
}

pub fn accuracy(set: &ScoredSet, rule: ThresholdRule) -> Result<f64, EvalError> {
    let n = set.scores.len() as f64;
    match rule {
        ThresholdRule::Fixed(tau) => {
            if tau.is_nan() {
                return Err(EvalError::NonFinite);
            }
            let correct = set
                .scores
                .iter()
                .zip(&set.labels)
                .filter(|(&s, &l)| (s >= tau) == l)
                .count();
            Ok(correct as f64 / n)
        }
        ThresholdRule::OracleBest => {
            // Start at tau = -inf (everything predicted true) and raise tau
            // past one group of equal scores at a time.
            let order = set.order();
            let mut correct = set.n_pos() as i64;
            let mut best = correct;
            let mut i = 0;
            while i < order.len() {
                let mut j = i;
                while j + 1 < order.len() && set.scores[order[j + 1]] == set.scores[order[i]] {
                    j += 1;
                }
                for &k in &order[i..=j] {
                    correct += if set.labels[k] { -1 } else { 1 };
                }
                best = best.max(correct);
                i = j + 1;
            }
            Ok(best as f64 / n)
        }
    }
}
