use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_uniform;
use super::linalg::{add_bias, gemm, gemm_nt, gemm_tn, sum_rows};
use super::{Parameters, Tensor};
use crate::error::{Error, Result};

/// Affine map `y = xW + b` with `W: [in, out]`, `b: [out]`.
///
/// Used directly on `[n, in]` inputs, or time-distributed over
/// `[n, W, in]` inputs where the same weights transform every window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Dense {
            weight: glorot_uniform(&[input, output], input, output, rng),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Tensor::zeros(&[input, output]),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    /// `[n, in] -> [n, out]`
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.expect_rank(2, "dense input")?;
        let (n, input) = (x.shape()[0], x.shape()[1]);
        self.check_input(input)?;
        Ok(self.apply_rows(x.data(), n, vec![n, self.output_dim()]))
    }

    /// Returns `(grad_x, grad_params)`.
    pub fn backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Dense)> {
        x.expect_rank(2, "dense input")?;
        let n = x.shape()[0];
        self.check_input(x.shape()[1])?;
        if grad_out.shape() != [n, self.output_dim()] {
            return Err(Error::shape(format!(
                "dense grad_out {:?}, expected [{n}, {}]",
                grad_out.shape(),
                self.output_dim()
            )));
        }
        let (grad_x, grads) = self.backward_rows(x.data(), grad_out.data(), n);
        Ok((Tensor::new(x.shape().to_vec(), grad_x)?, grads))
    }

    /// Time-distributed forward: `[n, W, in] -> [n, W, out]`.
    pub fn tdd_forward(&self, x: &Tensor) -> Result<Tensor> {
        x.expect_rank(3, "time-distributed input")?;
        let (n, w, input) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        self.check_input(input)?;
        Ok(self.apply_rows(x.data(), n * w, vec![n, w, self.output_dim()]))
    }

    pub fn tdd_backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Dense)> {
        x.expect_rank(3, "time-distributed input")?;
        let (n, w, input) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        self.check_input(input)?;
        if grad_out.shape() != [n, w, self.output_dim()] {
            return Err(Error::shape(format!(
                "time-distributed grad_out {:?}, expected [{n}, {w}, {}]",
                grad_out.shape(),
                self.output_dim()
            )));
        }
        let (grad_x, grads) = self.backward_rows(x.data(), grad_out.data(), n * w);
        Ok((Tensor::new(x.shape().to_vec(), grad_x)?, grads))
    }

    fn check_input(&self, input: usize) -> Result<()> {
        if input != self.input_dim() {
            return Err(Error::shape(format!(
                "dense expects {} input features, got {input}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn apply_rows(&self, x: &[f64], rows: usize, shape: Vec<usize>) -> Tensor {
        let (input, output) = (self.input_dim(), self.output_dim());
        let mut y = vec![0.0; rows * output];
        gemm(x, self.weight.data(), &mut y, rows, input, output);
        add_bias(&mut y, self.bias.data());
        Tensor::new(shape, y).expect("consistent shape")
    }

    fn backward_rows(&self, x: &[f64], g: &[f64], rows: usize) -> (Vec<f64>, Dense) {
        let (input, output) = (self.input_dim(), self.output_dim());
        let mut grads = Dense::zeros(input, output);
        gemm_tn(x, g, grads.weight.data_mut(), rows, input, output);
        sum_rows(g, grads.bias.data_mut());
        let mut grad_x = vec![0.0; rows * input];
        gemm_nt(g, self.weight.data(), &mut grad_x, rows, output, input);
        (grad_x, grads)
    }
}

impl Parameters for Dense {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn penalized(&self) -> Vec<bool> {
        vec![true, false]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut d = Dense::zeros(3, 3);
        for i in 0..3 {
            d.weight.data_mut()[i * 3 + i] = 1.0;
        }
        let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, 4.0, -1.0]).unwrap();
        assert_eq!(d.forward(&x).unwrap(), x);
    }

    #[test]
    fn parameter_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(Dense::new(10, 8, &mut rng).param_count(), 88);
    }

    #[test]
    fn tdd_matches_per_window_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Dense::new(4, 3, &mut rng);
        let x = Tensor::new(vec![2, 3, 4], (0..24).map(|i| (i as f64).sin()).collect()).unwrap();
        let y = d.tdd_forward(&x).unwrap();
        for n in 0..2 {
            for w in 0..3 {
                let start = (n * 3 + w) * 4;
                let slice = Tensor::new(vec![1, 4], x.data()[start..start + 4].to_vec()).unwrap();
                let yw = d.forward(&slice).unwrap();
                assert_eq!(yw.data(), &y.data()[(n * 3 + w) * 3..(n * 3 + w + 1) * 3]);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let d = Dense::zeros(3, 2);
        assert!(d.forward(&Tensor::zeros(&[2, 4])).is_err());
        assert!(d.tdd_forward(&Tensor::zeros(&[2, 4])).is_err());
        assert!(d
            .backward(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3]))
            .is_err());
    }
}
