use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_uniform;
use super::linalg::{gemm, gemm_nt, gemm_tn};
use super::{Parameters, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// No padding; output length `W - k + 1`.
    Valid,
    /// `k - 1` zero frames on the left; output length `W` and
    /// `y[t]` only sees `x[..=t]`.
    Causal,
}

/// 1-D convolution over the window axis. `kernel: [k, in, out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub padding: Padding,
}

impl Conv1d {
    pub fn new<R: Rng>(
        size: usize,
        input: usize,
        output: usize,
        padding: Padding,
        rng: &mut R,
    ) -> Self {
        Conv1d {
            kernel: glorot_uniform(&[size, input, output], size * input, size * output, rng),
            bias: Tensor::zeros(&[output]),
            padding,
        }
    }

    pub fn zeros(size: usize, input: usize, output: usize, padding: Padding) -> Self {
        Conv1d {
            kernel: Tensor::zeros(&[size, input, output]),
            bias: Tensor::zeros(&[output]),
            padding,
        }
    }

    pub fn size(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.kernel.shape()[2]
    }

    fn left_pad(&self) -> usize {
        match self.padding {
            Padding::Valid => 0,
            Padding::Causal => self.size() - 1,
        }
    }

    /// Output sequence length for an input of `len` frames.
    pub fn output_len(&self, len: usize) -> Result<usize> {
        match self.padding {
            Padding::Causal => Ok(len),
            Padding::Valid if len >= self.size() => Ok(len - self.size() + 1),
            Padding::Valid => Err(Error::shape(format!(
                "valid convolution with kernel {} needs at least {} frames, got {len}",
                self.size(),
                self.size()
            ))),
        }
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        x.expect_rank(3, "conv1d input")?;
        let (n, len, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if c != self.input_dim() {
            return Err(Error::shape(format!(
                "conv1d expects {} channels, got {c}",
                self.input_dim()
            )));
        }
        Ok((n, len, self.output_len(len)?))
    }

    /// `[n, W, in] -> [n, W_out, out]`
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, len, out_len) = self.dims(x)?;
        let (k, cin, cout) = (self.size(), self.input_dim(), self.output_dim());
        let pad = self.left_pad();
        let mut y = vec![0.0; n * out_len * cout];
        for b in 0..n {
            for t in 0..out_len {
                let yrow = &mut y[(b * out_len + t) * cout..(b * out_len + t + 1) * cout];
                yrow.copy_from_slice(self.bias.data());
                for j in 0..k {
                    let Some(src) = (t + j).checked_sub(pad) else {
                        continue;
                    };
                    if src >= len {
                        continue;
                    }
                    let xrow = &x.data()[(b * len + src) * cin..(b * len + src + 1) * cin];
                    let kj = &self.kernel.data()[j * cin * cout..(j + 1) * cin * cout];
                    gemm(xrow, kj, yrow, 1, cin, cout);
                }
            }
        }
        Tensor::new(vec![n, out_len, cout], y)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Conv1d)> {
        let (n, len, out_len) = self.dims(x)?;
        let (k, cin, cout) = (self.size(), self.input_dim(), self.output_dim());
        if grad_out.shape() != [n, out_len, cout] {
            return Err(Error::shape(format!(
                "conv1d grad_out {:?}, expected [{n}, {out_len}, {cout}]",
                grad_out.shape()
            )));
        }
        let pad = self.left_pad();
        let mut grads = Conv1d::zeros(k, cin, cout, self.padding);
        let mut gx = vec![0.0; x.len()];
        for b in 0..n {
            for t in 0..out_len {
                let g = &grad_out.data()[(b * out_len + t) * cout..(b * out_len + t + 1) * cout];
                for (gb, gv) in grads.bias.data_mut().iter_mut().zip(g) {
                    *gb += gv;
                }
                for j in 0..k {
                    let Some(src) = (t + j).checked_sub(pad) else {
                        continue;
                    };
                    if src >= len {
                        continue;
                    }
                    let row = (b * len + src) * cin..(b * len + src + 1) * cin;
                    let kj = j * cin * cout..(j + 1) * cin * cout;
                    gemm_tn(
                        &x.data()[row.clone()],
                        g,
                        &mut grads.kernel.data_mut()[kj.clone()],
                        1,
                        cin,
                        cout,
                    );
                    gemm_nt(g, &self.kernel.data()[kj], &mut gx[row], 1, cout, cin);
                }
            }
        }
        Ok((Tensor::new(x.shape().to_vec(), gx)?, grads))
    }
}

impl Parameters for Conv1d {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.kernel, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernel, &mut self.bias]
    }

    fn penalized(&self) -> Vec<bool> {
        vec![true, false]
    }
}
