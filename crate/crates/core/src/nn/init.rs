//! Seeded weight initialisers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Tensor;

/// Uniform on `[-limit, limit]` with `limit = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = rng.random_range(-limit..=limit);
    }
    t
}

/// Random `n x n` orthogonal matrix: Gram-Schmidt on a Gaussian matrix.
pub fn orthogonal<R: Rng>(n: usize, rng: &mut R) -> Tensor {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        // Two passes keep the basis orthogonal to machine precision.
        for _ in 0..2 {
            for q in &rows {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(q) {
                    *a -= d * b;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Tensor::new(vec![n, n], rows.concat()).expect("n*n values")
}
