//! Slow, obviously-correct reference implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// O(n^2) pair counting: wins plus half the ties over all pairs.
pub fn brute_force_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                credit += 1.0;
            } else if si == sj {
                credit += 0.5;
            }
        }
    }
    credit / pairs as f64
}

/// Percentile interval of the auROC over stratified bootstrap resamples.
pub fn bootstrap_ci(
    scores: &[f64],
    labels: &[u8],
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 0)
        .map(|(&s, _)| s)
        .collect();
    let mut aucs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let p: Vec<f64> = (0..pos.len())
            .map(|_| pos[rng.random_range(0..pos.len())])
            .collect();
        let n: Vec<f64> = (0..neg.len())
            .map(|_| neg[rng.random_range(0..neg.len())])
            .collect();
        aucs.push(sorted_pair_auroc(&p, &n));
    }
    aucs.sort_by(f64::total_cmp);
    let at = |q: f64| aucs[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    (at(alpha / 2.0), at(1.0 - alpha / 2.0))
}

/// Pair counting by merging two sorted lists.
fn sorted_pair_auroc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut neg = neg.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut credit = 0.0;
    for &p in pos {
        let below = neg.partition_point(|&x| x < p);
        let tied = neg[below..].partition_point(|&x| x == p);
        credit += below as f64 + 0.5 * tied as f64;
    }
    credit / (pos.len() * neg.len()) as f64
}

/// L2-regularized logistic regression fitted by Newton's method.
pub struct Logistic {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Logistic {
    pub fn fit(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Self {
        let d = x[0].len() + 1;
        let mut beta = vec![0.0; d];
        let row = |xi: &Vec<f64>| -> Vec<f64> {
            std::iter::once(1.0).chain(xi.iter().copied()).collect()
        };
        for _ in 0..50 {
            let mut grad = vec![0.0; d];
            let mut hess = vec![vec![0.0; d]; d];
            for (xi, &yi) in x.iter().zip(y) {
                let r = row(xi);
                let z: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let p = 1.0 / (1.0 + (-z).exp());
                for a in 0..d {
                    grad[a] += (p - yi) * r[a];
                    for b in 0..d {
                        hess[a][b] += p * (1.0 - p) * r[a] * r[b];
                    }
                }
            }
            for a in 1..d {
                grad[a] += ridge * beta[a];
                hess[a][a] += ridge;
            }
            hess[0][0] += 1e-9;
            let step = solve(hess, grad);
            let size: f64 = step.iter().map(|s| s.abs()).fold(0.0, f64::max);
            for (b, s) in beta.iter_mut().zip(&step) {
                *b -= s;
            }
            if size < 1e-10 {
                break;
            }
        }
        Logistic {
            bias: beta[0],
            weights: beta[1..].to_vec(),
        }
    }

    pub fn score(&self, xi: &[f64]) -> f64 {
        self.bias
            + xi.iter()
                .zip(&self.weights)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Lloyd's k-means with k-means++ seeding, best of several restarts.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..10 {
        let mut centers = vec![points[rng.random_range(0..points.len())]];
        while centers.len() < k {
            let w: Vec<f64> = points
                .iter()
                .map(|p| {
                    centers
                        .iter()
                        .map(|c| d2(p, c))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let total: f64 = w.iter().sum();
            let mut t = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, wi) in w.iter().enumerate() {
                if t < *wi {
                    pick = i;
                    break;
                }
                t -= wi;
            }
            centers.push(points[pick]);
        }
        let mut assign = vec![0; points.len()];
        for _ in 0..100 {
            for (i, p) in points.iter().enumerate() {
                assign[i] = (0..k)
                    .min_by(|&a, &b| d2(p, &centers[a]).total_cmp(&d2(p, &centers[b])))
                    .unwrap();
            }
            for (c, center) in centers.iter_mut().enumerate() {
                let members: Vec<&[f64; 2]> = points
                    .iter()
                    .zip(&assign)
                    .filter(|(_, &a)| a == c)
                    .map(|(p, _)| p)
                    .collect();
                if !members.is_empty() {
                    let n = members.len() as f64;
                    *center = [
                        members.iter().map(|p| p[0]).sum::<f64>() / n,
                        members.iter().map(|p| p[1]).sum::<f64>() / n,
                    ];
                }
            }
        }
        let inertia: f64 = points
            .iter()
            .zip(&assign)
            .map(|(p, &a)| d2(p, &centers[a]))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, assign));
        }
    }
    best.unwrap().1
}

/// Share of points whose cluster's majority true label matches their own.
pub fn purity(clusters: &[usize], truth: &[usize]) -> f64 {
    let k = clusters.iter().max().unwrap() + 1;
    let t = truth.iter().max().unwrap() + 1;
    let mut hits = 0;
    for c in 0..k {
        let mut counts = vec![0; t];
        for (&ci, &ti) in clusters.iter().zip(truth) {
            if ci == c {
                counts[ti] += 1;
            }
        }
        hits += counts.iter().max().unwrap();
    }
    hits as f64 / clusters.len() as f64
}

/// Mean silhouette coefficient under Euclidean distance.
pub fn silhouette(points: &[[f64; 2]], labels: &[u8]) -> f64 {
    let dist = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mean_to = |label: u8| {
            let (s, n) = points
                .iter()
                .zip(labels)
                .enumerate()
                .filter(|(j, (_, &l))| *j != i && l == label)
                .fold((0.0, 0usize), |(s, n), (_, (q, _))| (s + dist(p, q), n + 1));
            s / n as f64
        };
        let a = mean_to(labels[i]);
        let b = mean_to(1 - labels[i]);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}
