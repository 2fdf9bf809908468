//! auROC, DeLong confidence intervals and the relative-difference statistic.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Scores paired with binary labels (1 = positive, i.e. `Uncontrolled`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("label {l} is not 0 or 1")));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("non-finite score".into()));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn from_f64_labels(scores: Vec<f64>, labels: &[f64]) -> Result<Self> {
        let labels = labels
            .iter()
            .map(|&y| match y {
                y if y == 0.0 => Ok(0),
                y if y == 1.0 => Ok(1),
                y => Err(Error::invalid(format!("label {y} is not 0 or 1"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        ScoredSet::new(scores, labels)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.len() - self.n_pos()
    }

    fn class_scores(&self, label: u8) -> Vec<f64> {
        self.scores
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(&s, _)| s)
            .collect()
    }
}

/// Twice the 1-based midrank of every value, so ties stay integral.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j+1 share the midrank (i + j + 2) / 2
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Mann-Whitney auROC with ties credited one half.
pub fn auroc(s: &ScoredSet) -> Result<f64> {
    let (n1, n0) = (s.n_pos() as u64, s.n_neg() as u64);
    if n1 == 0 || n0 == 0 {
        return Err(Error::invalid("auROC needs both classes present"));
    }
    let ranks = doubled_midranks(&s.scores);
    let pos_sum: u64 = ranks
        .iter()
        .zip(&s.labels)
        .filter(|(_, &l)| l == 1)
        .map(|(r, _)| r)
        .sum();
    // pos_sum - n1(n1+1) = 2 * (wins + ties / 2)
    let twice_u = pos_sum - n1 * (n1 + 1);
    Ok(twice_u as f64 / (2 * n1 * n0) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelongCi {
    pub auc: f64,
    pub variance: f64,
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
}

/// DeLong variance of the auROC and the normal-approximation interval,
/// clipped to [0, 1].
pub fn delong_ci(s: &ScoredSet, alpha: f64) -> Result<DelongCi> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let pos = s.class_scores(1);
    let neg = s.class_scores(0);
    let (m, n) = (pos.len(), neg.len());
    if m < 2 || n < 2 {
        return Err(Error::invalid(format!(
            "DeLong needs at least 2 samples per class, got {m} positive and {n} negative"
        )));
    }
    let auc = auroc(s)?;

    let mut combined = pos.clone();
    combined.extend_from_slice(&neg);
    let r_all = doubled_midranks(&combined);
    let r_pos = doubled_midranks(&pos);
    let r_neg = doubled_midranks(&neg);

    // V10_i: share of negatives below positive i (ties half).
    let v10: Vec<f64> = (0..m)
        .map(|i| (r_all[i] - r_pos[i]) as f64 / (2.0 * n as f64))
        .collect();
    // V01_j: share of positives above negative j (ties half).
    let v01: Vec<f64> = (0..n)
        .map(|j| 1.0 - (r_all[m + j] - r_neg[j]) as f64 / (2.0 * m as f64))
        .collect();

    let variance = (sample_variance(&v10) / m as f64 + sample_variance(&v01) / n as f64).max(0.0);
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let half = z * variance.sqrt();
    Ok(DelongCi {
        auc,
        variance,
        lo: (auc - half).clamp(0.0, 1.0),
        hi: (auc + half).clamp(0.0, 1.0),
        alpha,
    })
}

fn sample_variance(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// `(permuted_mean - original) / original`; negative when permuting hurts.
pub fn relative_difference(permuted_mean: f64, original: f64) -> Result<f64> {
    if original == 0.0 {
        return Err(Error::invalid(
            "relative difference undefined for original score 0",
        ));
    }
    Ok((permuted_mean - original) / original)
}
