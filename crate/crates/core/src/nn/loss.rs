use super::activation::sigmoid;
use super::Tensor;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Mean binary cross-entropy of `sigmoid(logits)` against 0/1 labels.
/// Returns the loss and its gradient with respect to the logits,
/// `(p - y) / n`.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::shape(format!(
            "bce: {} logits vs {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::invalid(format!("label {y} is not 0 or 1")));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let p = sigmoid(z).clamp(PROB_EPS, 1.0 - PROB_EPS);
            loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            (p - y) / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Same as [`bce_with_logits`] but on probabilities, without a gradient.
pub fn bce(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::shape("bce: length mismatch"));
    }
    let mut loss = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        if y != 0.0 && y != 1.0 {
            return Err(Error::invalid(format!("label {y} is not 0 or 1")));
        }
        let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(loss / probs.len() as f64)
}

/// `l1 * sum|w| + l2 * sum w^2` over the given weight tensors.
pub fn penalty<'a>(weights: impl IntoIterator<Item = &'a Tensor>, l1: f64, l2: f64) -> f64 {
    if l1 == 0.0 && l2 == 0.0 {
        return 0.0;
    }
    weights
        .into_iter()
        .flat_map(|w| w.data())
        .map(|&w| l1 * w.abs() + l2 * w * w)
        .sum()
}

/// Adds the penalty gradient `l1 * sign(w) + 2 * l2 * w` into `grad`.
pub fn add_penalty_grad(weight: &Tensor, grad: &mut Tensor, l1: f64, l2: f64) {
    for (g, &w) in grad.data_mut().iter_mut().zip(weight.data()) {
        let sign = if w > 0.0 {
            1.0
        } else if w < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g += l1 * sign + 2.0 * l2 * w;
    }
}
