use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::init::{glorot_uniform, orthogonal};
use super::linalg::{add_bias, gemm, gemm_nt, gemm_tn, sum_rows};
use super::{Parameters, Tensor};
use crate::error::{Error, Result};

/// Gated recurrent unit returning the last hidden state.
///
/// ```text
/// z_t = sigmoid(x_t Wz + h_{t-1} Uz + bz)
/// r_t = sigmoid(x_t Wr + h_{t-1} Ur + br)
/// c_t = tanh(x_t Wh + (r_t * h_{t-1}) Uh + bh)
/// h_t = (1 - z_t) * h_{t-1} + z_t * c_t
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub wz: Tensor,
    pub wr: Tensor,
    pub wh: Tensor,
    pub uz: Tensor,
    pub ur: Tensor,
    pub uh: Tensor,
    pub bz: Tensor,
    pub br: Tensor,
    pub bh: Tensor,
}

/// Per-timestep activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruCache {
    steps: Vec<GruStep>,
}

#[derive(Debug, Clone)]
struct GruStep {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
}

impl Gru {
    pub fn new<R: Rng>(input: usize, units: usize, rng: &mut R) -> Self {
        let mut w = || glorot_uniform(&[input, units], input, units, rng);
        let (wz, wr, wh) = (w(), w(), w());
        Gru {
            wz,
            wr,
            wh,
            uz: orthogonal(units, rng),
            ur: orthogonal(units, rng),
            uh: orthogonal(units, rng),
            bz: Tensor::zeros(&[units]),
            br: Tensor::zeros(&[units]),
            bh: Tensor::zeros(&[units]),
        }
    }

    pub fn zeros(input: usize, units: usize) -> Self {
        let w = || Tensor::zeros(&[input, units]);
        let u = || Tensor::zeros(&[units, units]);
        let b = || Tensor::zeros(&[units]);
        Gru {
            wz: w(),
            wr: w(),
            wh: w(),
            uz: u(),
            ur: u(),
            uh: u(),
            bz: b(),
            br: b(),
            bh: b(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.wz.shape()[0]
    }

    pub fn units(&self) -> usize {
        self.wz.shape()[1]
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize)> {
        x.expect_rank(3, "gru input")?;
        if x.shape()[2] != self.input_dim() {
            return Err(Error::shape(format!(
                "gru expects {} input features, got {}",
                self.input_dim(),
                x.shape()[2]
            )));
        }
        Ok((x.shape()[0], x.shape()[1]))
    }

    /// `[n, W, in] -> [n, units]`, starting from a zero state.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_cached(x).map(|(h, _)| h)
    }

    pub fn forward_cached(&self, x: &Tensor) -> Result<(Tensor, GruCache)> {
        let (n, len) = self.dims(x)?;
        let (input, u) = (self.input_dim(), self.units());
        let project = |w: &Tensor, b: &Tensor| {
            let mut p = vec![0.0; n * len * u];
            gemm(x.data(), w.data(), &mut p, n * len, input, u);
            add_bias(&mut p, b.data());
            p
        };
        let (xz, xr, xh) = (
            project(&self.wz, &self.bz),
            project(&self.wr, &self.br),
            project(&self.wh, &self.bh),
        );

        let mut h = vec![0.0; n * u];
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let mut z = gather_step(&xz, n, len, t, u);
            let mut r = gather_step(&xr, n, len, t, u);
            gemm(&h, self.uz.data(), &mut z, n, u, u);
            gemm(&h, self.ur.data(), &mut r, n, u, u);
            z.iter_mut().for_each(|v| *v = sigmoid(*v));
            r.iter_mut().for_each(|v| *v = sigmoid(*v));
            let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
            let mut cand = gather_step(&xh, n, len, t, u);
            gemm(&rh, self.uh.data(), &mut cand, n, u, u);
            cand.iter_mut().for_each(|v| *v = v.tanh());
            let next: Vec<f64> = (0..n * u)
                .map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i])
                .collect();
            steps.push(GruStep {
                h_prev: std::mem::replace(&mut h, next),
                z,
                r,
                cand,
            });
        }
        Ok((Tensor::new(vec![n, u], h)?, GruCache { steps }))
    }

    /// Backpropagation through time from the gradient of the last state.
    pub fn backward(&self, x: &Tensor, cache: &GruCache, grad_h: &Tensor) -> Result<(Tensor, Gru)> {
        let (n, len) = self.dims(x)?;
        let (input, u) = (self.input_dim(), self.units());
        if grad_h.shape() != [n, u] || cache.steps.len() != len {
            return Err(Error::shape(
                "gru backward: gradient or cache does not match input",
            ));
        }
        let mut grads = Gru::zeros(input, u);
        let mut daz_all = vec![0.0; n * len * u];
        let mut dar_all = vec![0.0; n * len * u];
        let mut dah_all = vec![0.0; n * len * u];
        let mut dh = grad_h.data().to_vec();

        for t in (0..len).rev() {
            let s = &cache.steps[t];
            let mut dh_prev: Vec<f64> = (0..n * u).map(|i| dh[i] * (1.0 - s.z[i])).collect();
            let dah: Vec<f64> = (0..n * u)
                .map(|i| dh[i] * s.z[i] * (1.0 - s.cand[i] * s.cand[i]))
                .collect();
            let daz: Vec<f64> = (0..n * u)
                .map(|i| dh[i] * (s.cand[i] - s.h_prev[i]) * s.z[i] * (1.0 - s.z[i]))
                .collect();

            let rh: Vec<f64> = s.r.iter().zip(&s.h_prev).map(|(a, b)| a * b).collect();
            gemm_tn(&rh, &dah, grads.uh.data_mut(), n, u, u);
            let mut drh = vec![0.0; n * u];
            gemm_nt(&dah, self.uh.data(), &mut drh, n, u, u);
            let dar: Vec<f64> = (0..n * u)
                .map(|i| drh[i] * s.h_prev[i] * s.r[i] * (1.0 - s.r[i]))
                .collect();
            for i in 0..n * u {
                dh_prev[i] += drh[i] * s.r[i];
            }

            gemm_tn(&s.h_prev, &daz, grads.uz.data_mut(), n, u, u);
            gemm_tn(&s.h_prev, &dar, grads.ur.data_mut(), n, u, u);
            gemm_nt(&daz, self.uz.data(), &mut dh_prev, n, u, u);
            gemm_nt(&dar, self.ur.data(), &mut dh_prev, n, u, u);

            scatter_step(&mut daz_all, &daz, n, len, t, u);
            scatter_step(&mut dar_all, &dar, n, len, t, u);
            scatter_step(&mut dah_all, &dah, n, len, t, u);
            dh = dh_prev;
        }

        let rows = n * len;
        let mut gx = vec![0.0; x.len()];
        for (da, w, gw, gb) in [
            (&daz_all, &self.wz, &mut grads.wz, &mut grads.bz),
            (&dar_all, &self.wr, &mut grads.wr, &mut grads.br),
            (&dah_all, &self.wh, &mut grads.wh, &mut grads.bh),
        ] {
            gemm_tn(x.data(), da, gw.data_mut(), rows, input, u);
            sum_rows(da, gb.data_mut());
            gemm_nt(da, w.data(), &mut gx, rows, u, input);
        }
        Ok((Tensor::new(x.shape().to_vec(), gx)?, grads))
    }
}

impl Parameters for Gru {
    fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.wz, &self.wr, &self.wh, &self.uz, &self.ur, &self.uh, &self.bz, &self.br,
            &self.bh,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.wz,
            &mut self.wr,
            &mut self.wh,
            &mut self.uz,
            &mut self.ur,
            &mut self.uh,
            &mut self.bz,
            &mut self.br,
            &mut self.bh,
        ]
    }

    fn penalized(&self) -> Vec<bool> {
        vec![true, true, true, true, true, true, false, false, false]
    }
}

/// Rows `(b, t)` for all `b` of a `[n * len, u]` buffer laid out batch-major.
pub(crate) fn gather_step(all: &[f64], n: usize, len: usize, t: usize, u: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * u);
    for b in 0..n {
        let at = (b * len + t) * u;
        out.extend_from_slice(&all[at..at + u]);
    }
    out
}

pub(crate) fn scatter_step(
    all: &mut [f64],
    step: &[f64],
    n: usize,
    len: usize,
    t: usize,
    u: usize,
) {
    for b in 0..n {
        let at = (b * len + t) * u;
        all[at..at + u].copy_from_slice(&step[b * u..(b + 1) * u]);
    }
}
