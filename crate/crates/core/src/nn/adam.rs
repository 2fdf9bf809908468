use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Adam with bias correction:
///
/// ```text
/// m <- b1 m + (1 - b1) g
/// v <- b2 v + (1 - b2) g^2
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    /// Default coefficients: lr 0.001, beta1 0.9, beta2 0.999, eps 1e-7.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let sizes: Vec<usize> = params.into_iter().map(|p| p.len()).collect();
        Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            t: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::shape("adam: parameter and gradient sizes differ"));
            }
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((theta, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut theta = Tensor::zeros(&[1]);
        let mut adam = Adam::new([&theta]);
        adam.step(&mut [&mut theta], &[Tensor::filled(&[1], 1.0)])
            .unwrap();
        assert!((theta.data()[0] + 1e-3).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut theta = Tensor::new(vec![3], vec![0.3, -1.0, 2.0]).unwrap();
        let before = theta.clone();
        let mut adam = Adam::new([&theta]);
        for _ in 0..5 {
            adam.step(&mut [&mut theta], &[Tensor::zeros(&[3])])
                .unwrap();
        }
        assert_eq!(theta, before);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut theta = Tensor::filled(&[1], 1.0);
        let mut adam = Adam::new([&theta]);
        let mut trace = vec![1.0];
        for _ in 0..200 {
            let g = Tensor::filled(&[1], 2.0 * theta.data()[0]);
            adam.step(&mut [&mut theta], &[g]).unwrap();
            trace.push(theta.data()[0]);
        }
        assert!(trace[200].abs() < 0.9);
        assert!(trace.windows(2).all(|w| w[1] < w[0]));
    }
}
