use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::gru::{gather_step, scatter_step};
use super::init::{glorot_uniform, orthogonal};
use super::linalg::{add_bias, gemm, gemm_nt, gemm_tn, sum_rows};
use super::{Parameters, Tensor};
use crate::error::{Error, Result};

/// Four-gate LSTM returning the last hidden state. The forget-gate bias
/// starts at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub wi: Tensor,
    pub wf: Tensor,
    pub wc: Tensor,
    pub wo: Tensor,
    pub ui: Tensor,
    pub uf: Tensor,
    pub uc: Tensor,
    pub uo: Tensor,
    pub bi: Tensor,
    pub bf: Tensor,
    pub bc: Tensor,
    pub bo: Tensor,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<LstmStep>,
}

#[derive(Debug, Clone)]
struct LstmStep {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl Lstm {
    pub fn new<R: Rng>(input: usize, units: usize, rng: &mut R) -> Self {
        let mut w = || glorot_uniform(&[input, units], input, units, rng);
        let (wi, wf, wc, wo) = (w(), w(), w(), w());
        Lstm {
            wi,
            wf,
            wc,
            wo,
            ui: orthogonal(units, rng),
            uf: orthogonal(units, rng),
            uc: orthogonal(units, rng),
            uo: orthogonal(units, rng),
            bi: Tensor::zeros(&[units]),
            bf: Tensor::filled(&[units], 1.0),
            bc: Tensor::zeros(&[units]),
            bo: Tensor::zeros(&[units]),
        }
    }

    pub fn zeros(input: usize, units: usize) -> Self {
        let w = || Tensor::zeros(&[input, units]);
        let u = || Tensor::zeros(&[units, units]);
        let b = || Tensor::zeros(&[units]);
        Lstm {
            wi: w(),
            wf: w(),
            wc: w(),
            wo: w(),
            ui: u(),
            uf: u(),
            uc: u(),
            uo: u(),
            bi: b(),
            bf: b(),
            bc: b(),
            bo: b(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.wi.shape()[0]
    }

    pub fn units(&self) -> usize {
        self.wi.shape()[1]
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize)> {
        x.expect_rank(3, "lstm input")?;
        if x.shape()[2] != self.input_dim() {
            return Err(Error::shape(format!(
                "lstm expects {} input features, got {}",
                self.input_dim(),
                x.shape()[2]
            )));
        }
        Ok((x.shape()[0], x.shape()[1]))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_cached(x).map(|(h, _)| h)
    }

    pub fn forward_cached(&self, x: &Tensor) -> Result<(Tensor, LstmCache)> {
        let (n, len) = self.dims(x)?;
        let (input, u) = (self.input_dim(), self.units());
        let project = |w: &Tensor, b: &Tensor| {
            let mut p = vec![0.0; n * len * u];
            gemm(x.data(), w.data(), &mut p, n * len, input, u);
            add_bias(&mut p, b.data());
            p
        };
        let xi = project(&self.wi, &self.bi);
        let xf = project(&self.wf, &self.bf);
        let xc = project(&self.wc, &self.bc);
        let xo = project(&self.wo, &self.bo);

        let mut h = vec![0.0; n * u];
        let mut c = vec![0.0; n * u];
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let gate = |pre: &[f64], rec: &Tensor, act: fn(f64) -> f64| {
                let mut a = gather_step(pre, n, len, t, u);
                gemm(&h, rec.data(), &mut a, n, u, u);
                a.iter_mut().for_each(|v| *v = act(*v));
                a
            };
            let i = gate(&xi, &self.ui, sigmoid);
            let f = gate(&xf, &self.uf, sigmoid);
            let g = gate(&xc, &self.uc, f64::tanh);
            let o = gate(&xo, &self.uo, sigmoid);
            let c_next: Vec<f64> = (0..n * u).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c_next.iter().map(|v| v.tanh()).collect();
            let h_next: Vec<f64> = (0..n * u).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(LstmStep {
                h_prev: std::mem::replace(&mut h, h_next),
                c_prev: std::mem::replace(&mut c, c_next),
                i,
                f,
                g,
                o,
                tanh_c,
            });
        }
        Ok((Tensor::new(vec![n, u], h)?, LstmCache { steps }))
    }

    pub fn backward(
        &self,
        x: &Tensor,
        cache: &LstmCache,
        grad_h: &Tensor,
    ) -> Result<(Tensor, Lstm)> {
        let (n, len) = self.dims(x)?;
        let (input, u) = (self.input_dim(), self.units());
        if grad_h.shape() != [n, u] || cache.steps.len() != len {
            return Err(Error::shape(
                "lstm backward: gradient or cache does not match input",
            ));
        }
        let mut grads = Lstm::zeros(input, u);
        let mut da_all: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n * len * u]);
        let mut dh = grad_h.data().to_vec();
        let mut dc = vec![0.0; n * u];

        for t in (0..len).rev() {
            let s = &cache.steps[t];
            let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n * u]);
            for k in 0..n * u {
                let dct = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                da[0][k] = dct * s.g[k] * s.i[k] * (1.0 - s.i[k]);
                da[1][k] = dct * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
                da[2][k] = dct * s.i[k] * (1.0 - s.g[k] * s.g[k]);
                da[3][k] = dh[k] * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
                dc[k] = dct * s.f[k];
            }
            let mut dh_prev = vec![0.0; n * u];
            for (q, (rec, grec)) in [
                (&self.ui, &mut grads.ui),
                (&self.uf, &mut grads.uf),
                (&self.uc, &mut grads.uc),
                (&self.uo, &mut grads.uo),
            ]
            .into_iter()
            .enumerate()
            {
                gemm_tn(&s.h_prev, &da[q], grec.data_mut(), n, u, u);
                gemm_nt(&da[q], rec.data(), &mut dh_prev, n, u, u);
                scatter_step(&mut da_all[q], &da[q], n, len, t, u);
            }
            dh = dh_prev;
        }

        let rows = n * len;
        let mut gx = vec![0.0; x.len()];
        for (q, (w, gw, gb)) in [
            (&self.wi, &mut grads.wi, &mut grads.bi),
            (&self.wf, &mut grads.wf, &mut grads.bf),
            (&self.wc, &mut grads.wc, &mut grads.bc),
            (&self.wo, &mut grads.wo, &mut grads.bo),
        ]
        .into_iter()
        .enumerate()
        {
            gemm_tn(x.data(), &da_all[q], gw.data_mut(), rows, input, u);
            sum_rows(&da_all[q], gb.data_mut());
            gemm_nt(&da_all[q], w.data(), &mut gx, rows, u, input);
        }
        Ok((Tensor::new(x.shape().to_vec(), gx)?, grads))
    }
}

impl Parameters for Lstm {
    fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.wi, &self.wf, &self.wc, &self.wo, &self.ui, &self.uf, &self.uc, &self.uo,
            &self.bi, &self.bf, &self.bc, &self.bo,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.wi,
            &mut self.wf,
            &mut self.wc,
            &mut self.wo,
            &mut self.ui,
            &mut self.uf,
            &mut self.uc,
            &mut self.uo,
            &mut self.bi,
            &mut self.bf,
            &mut self.bc,
            &mut self.bo,
        ]
    }

    fn penalized(&self) -> Vec<bool> {
        let mut flags = vec![true; 8];
        flags.extend([false; 4]);
        flags
    }
}
