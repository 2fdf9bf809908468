//! Exact t-SNE.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

pub const P_FLOOR: f64 = 1e-12;
const BETA_STEPS: usize = 50;
const ENTROPY_TOL_BITS: f64 = 1e-5;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated P and momentum 0.5; after this the
    /// momentum is 0.8.
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    pub embedding: Vec<[f64; 2]>,
    /// KL(P || Q) after each iteration, with the unexaggerated P.
    pub kl: Vec<f64>,
}

fn squared_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Row `i` of the conditional affinities for precision `beta`, and its
/// entropy in bits.
fn conditional_row(dist: &[f64], i: usize, beta: f64, row: &mut [f64]) -> f64 {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (r, &d)) in row.iter_mut().zip(dist).enumerate() {
        // shifting by the smallest distance keeps at least one term at 1
        *r = if j == i {
            0.0
        } else {
            (-beta * (d - min)).exp()
        };
        sum += *r;
    }
    let mut h = 0.0;
    for (j, r) in row.iter_mut().enumerate() {
        *r /= sum;
        if j != i && *r > 0.0 {
            h -= *r * r.log2();
        }
    }
    h
}

fn check_inputs(x: &[Vec<f64>], perplexity: f64) -> Result<()> {
    let n = x.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "t-SNE needs at least 5 points, got {n}"
        )));
    }
    if !(perplexity > 0.0 && perplexity < (n as f64 - 1.0) / 3.0) {
        return Err(Error::invalid(format!(
            "perplexity {perplexity} infeasible for {n} points (must be below {:.3})",
            (n as f64 - 1.0) / 3.0
        )));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::shape("t-SNE input rows must share a non-zero width"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite t-SNE input".into()));
    }
    Ok(())
}

/// Symmetric joint affinities, row-major `n x n`. Each point's Gaussian
/// precision is set by binary search so its conditional distribution has
/// the requested perplexity; `P = (P_cond + P_cond^T) / 2n`, off-diagonal
/// entries floored at [`P_FLOOR`] and the remaining mass rescaled so the
/// matrix sums to 1. The diagonal is 0.
pub fn joint_probabilities(x: &[Vec<f64>], perplexity: f64) -> Result<Vec<f64>> {
    check_inputs(x, perplexity)?;
    let n = x.len();
    let dist = squared_distances(x);
    let target = perplexity.log2();
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        let drow = &dist[i * n..(i + 1) * n];
        let row = &mut cond[i * n..(i + 1) * n];
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        for _ in 0..BETA_STEPS {
            let h = conditional_row(drow, i, beta, row);
            let diff = h - target;
            if diff.abs() < ENTROPY_TOL_BITS {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() {
                    0.5 * (beta + hi)
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        conditional_row(drow, i, beta, row);
    }

    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
            }
        }
    }
    let floored = p
        .iter()
        .enumerate()
        .filter(|&(k, &v)| k / n != k % n && v < P_FLOOR)
        .count();
    let rest: f64 = p.iter().filter(|&&v| v >= P_FLOOR).sum();
    let scale = (1.0 - floored as f64 * P_FLOOR) / rest;
    for (k, v) in p.iter_mut().enumerate() {
        if k / n == k % n {
            continue;
        }
        *v = if *v < P_FLOOR {
            P_FLOOR
        } else {
            (*v * scale).max(P_FLOOR)
        };
    }
    Ok(p)
}

/// Embeds rows of `x` in two dimensions by gradient descent on KL(P||Q)
/// with Student-t affinities, momentum, early exaggeration and adaptive
/// per-coordinate gains.
pub fn tsne(x: &[Vec<f64>], cfg: &TsneConfig) -> Result<TsneResult> {
    let p = joint_probabilities(x, cfg.perplexity)?;
    let n = x.len();
    let mut rng = substream(cfg.seed, &[]);
    let init = Normal::new(0.0, 1e-4).unwrap();
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [init.sample(&mut rng), init.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut kl = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let exaggerate = it < cfg.exaggeration_iters;
        let momentum = if exaggerate { 0.5 } else { 0.8 };
        let factor = if exaggerate {
            cfg.early_exaggeration
        } else {
            1.0
        };

        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let d = (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2);
                let q = 1.0 / (1.0 + d);
                num[i * n + j] = q;
                num[j * n + i] = q;
                z += 2.0 * q;
            }
        }
        let mut cost = 0.0;
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = (num[i * n + j] / z).max(P_FLOOR);
                let pij = p[i * n + j];
                cost += pij * (pij / q).ln();
                let m = (factor * pij - q) * num[i * n + j];
                g[0] += m * (y[i][0] - y[j][0]);
                g[1] += m * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                let grad = 4.0 * g[d];
                gains[i][d] = if (grad > 0.0) != (update[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(MIN_GAIN)
                };
                update[i][d] = momentum * update[i][d] - cfg.learning_rate * gains[i][d] * grad;
            }
        }
        kl.push(cost);
        for (yi, u) in y.iter_mut().zip(&update) {
            yi[0] += u[0];
            yi[1] += u[1];
        }
        let mean = [
            y.iter().map(|v| v[0]).sum::<f64>() / n as f64,
            y.iter().map(|v| v[1]).sum::<f64>() / n as f64,
        ];
        for yi in &mut y {
            yi[0] -= mean[0];
            yi[1] -= mean[1];
        }
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("t-SNE diverged".into()));
    }
    Ok(TsneResult { embedding: y, kl })
}
