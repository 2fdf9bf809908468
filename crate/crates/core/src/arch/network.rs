use serde::{Deserialize, Serialize};

use super::{ArchitectureKind, HyperParams};
use crate::error::{Error, Result};
use crate::nn::{
    add_penalty_grad, bce_with_logits, dropout, dropout_backward, penalty, relu_backward_inplace,
    relu_inplace, sigmoid, Conv1d, Dense, Gru, GruCache, Lstm, LstmCache, Mode, NetRng, Padding,
    Parameters, Tensor,
};

/// The time-aggregation layer: the only part that differs between kinds
/// besides whether the input layer is time-distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Aggregator {
    Dense(Dense),
    Conv(Conv1d),
    Gru(Gru),
    Lstm(Lstm),
}

impl Aggregator {
    fn layer(&self) -> &dyn Parameters {
        match self {
            Aggregator::Dense(l) => l,
            Aggregator::Conv(l) => l,
            Aggregator::Gru(l) => l,
            Aggregator::Lstm(l) => l,
        }
    }

    fn layer_mut(&mut self) -> &mut dyn Parameters {
        match self {
            Aggregator::Dense(l) => l,
            Aggregator::Conv(l) => l,
            Aggregator::Gru(l) => l,
            Aggregator::Lstm(l) => l,
        }
    }
}

/// Input layer, aggregation layer, one hidden dense layer, and a single
/// sigmoid output unit. Dropout follows the input and aggregation layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub kind: ArchitectureKind,
    pub hyperparams: HyperParams,
    pub n_windows: usize,
    pub n_features: usize,
    pub input: Dense,
    pub aggregator: Aggregator,
    pub hidden: Dense,
    pub output: Dense,
}

enum AggCache {
    None,
    Gru(GruCache),
    Lstm(LstmCache),
}

/// Everything the backward pass needs from a forward pass.
pub struct ForwardCache {
    x: Tensor,
    input_out: Tensor,
    mask1: Option<Vec<f64>>,
    agg_in: Tensor,
    agg_cache: AggCache,
    agg_out: Tensor,
    mask2: Option<Vec<f64>>,
    hidden_in: Tensor,
    /// Post-activation output of the hidden dense layer.
    pub representation: Tensor,
    pub logits: Vec<f64>,
}

impl Network {
    pub fn build(
        kind: ArchitectureKind,
        hp: &HyperParams,
        n_features: usize,
        n_windows: usize,
        rng: &mut NetRng,
    ) -> Result<Self> {
        hp.validate(kind)?;
        if n_features == 0 || n_windows == 0 {
            return Err(Error::shape(
                "network needs at least one feature and one window",
            ));
        }
        let (u_in, u_agg, u_dense) = (hp.units_input, hp.units_agg, hp.units_dense);
        let input = match kind {
            ArchitectureKind::Dense => Dense::new(n_windows * n_features, u_in, rng),
            _ => Dense::new(n_features, u_in, rng),
        };
        let (aggregator, agg_width) = match kind {
            ArchitectureKind::Dense => (Aggregator::Dense(Dense::new(u_in, u_agg, rng)), u_agg),
            ArchitectureKind::TddDense => (
                Aggregator::Dense(Dense::new(n_windows * u_in, u_agg, rng)),
                u_agg,
            ),
            ArchitectureKind::TddGru => (Aggregator::Gru(Gru::new(u_in, u_agg, rng)), u_agg),
            ArchitectureKind::TddLstm => (Aggregator::Lstm(Lstm::new(u_in, u_agg, rng)), u_agg),
            ArchitectureKind::TddCnnValid | ArchitectureKind::TddCnnCausal => {
                let padding = if kind == ArchitectureKind::TddCnnValid {
                    Padding::Valid
                } else {
                    Padding::Causal
                };
                let conv = Conv1d::new(hp.conv_kernel, u_in, u_agg, padding, rng);
                let len = conv.output_len(n_windows)?;
                (Aggregator::Conv(conv), len * u_agg)
            }
        };
        let hidden = Dense::new(agg_width, u_dense, rng);
        let output = Dense::new(u_dense, 1, rng);
        Ok(Network {
            kind,
            hyperparams: hp.clone(),
            n_windows,
            n_features,
            input,
            aggregator,
            hidden,
            output,
        })
    }

    /// Width of the flattened aggregation output fed to the hidden layer.
    pub fn aggregation_width(&self) -> usize {
        self.hidden.input_dim()
    }

    pub fn representation_width(&self) -> usize {
        self.hidden.output_dim()
    }

    fn layers(&self) -> [&dyn Parameters; 4] {
        [
            &self.input,
            self.aggregator.layer(),
            &self.hidden,
            &self.output,
        ]
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        x.expect_rank(3, "network input")?;
        if x.shape()[1] != self.n_windows || x.shape()[2] != self.n_features {
            return Err(Error::shape(format!(
                "network expects [n, {}, {}], got {:?}",
                self.n_windows,
                self.n_features,
                x.shape()
            )));
        }
        Ok(x.shape()[0])
    }

    /// Full forward pass on `[n, W, F]`. Dropout is active only when an
    /// RNG is supplied.
    pub fn forward(&self, x: &Tensor, rng: Option<&mut NetRng>) -> Result<ForwardCache> {
        let n = self.check_input(x)?;
        let rate = self.hyperparams.dropout;
        let mut rng = rng;

        let mut input_out = match self.kind {
            ArchitectureKind::Dense => {
                let flat = x.clone().reshape(&[n, self.n_windows * self.n_features])?;
                self.input.forward(&flat)?
            }
            _ => self.input.tdd_forward(x)?,
        };
        relu_inplace(input_out.data_mut());
        let (agg_in, mask1) = apply_dropout(&input_out, rate, &mut rng)?;

        let (mut agg_out, agg_cache) = match &self.aggregator {
            Aggregator::Dense(d) => {
                let flat = agg_in.clone().reshape(&[n, d.input_dim()])?;
                (d.forward(&flat)?, AggCache::None)
            }
            Aggregator::Conv(c) => (c.forward(&agg_in)?, AggCache::None),
            Aggregator::Gru(g) => {
                let (h, cache) = g.forward_cached(&agg_in)?;
                (h, AggCache::Gru(cache))
            }
            Aggregator::Lstm(l) => {
                let (h, cache) = l.forward_cached(&agg_in)?;
                (h, AggCache::Lstm(cache))
            }
        };
        if matches!(self.aggregator, Aggregator::Dense(_) | Aggregator::Conv(_)) {
            relu_inplace(agg_out.data_mut());
        }
        let (dropped, mask2) = apply_dropout(&agg_out, rate, &mut rng)?;
        let hidden_in = dropped.reshape(&[n, self.aggregation_width()])?;

        let mut representation = self.hidden.forward(&hidden_in)?;
        relu_inplace(representation.data_mut());
        let logits = self.output.forward(&representation)?.into_data();

        Ok(ForwardCache {
            x: x.clone(),
            input_out,
            mask1,
            agg_in,
            agg_cache,
            agg_out,
            mask2,
            hidden_in,
            representation,
            logits,
        })
    }

    /// Parameter gradients given the gradient of the objective with respect
    /// to the logits. Gradients come back in [`Parameters::params`] order.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &[f64]) -> Result<Vec<Tensor>> {
        let n = cache.logits.len();
        let grad_logits = Tensor::new(vec![n, 1], grad_logits.to_vec())?;
        let (mut g_rep, g_output) = self.output.backward(&cache.representation, &grad_logits)?;
        relu_backward_inplace(g_rep.data_mut(), cache.representation.data());
        let (g_hidden_in, g_hidden) = self.hidden.backward(&cache.hidden_in, &g_rep)?;

        let mut g_agg_out = g_hidden_in.reshape(cache.agg_out.shape())?;
        dropout_backward(&mut g_agg_out, cache.mask2.as_deref());
        if matches!(self.aggregator, Aggregator::Dense(_) | Aggregator::Conv(_)) {
            relu_backward_inplace(g_agg_out.data_mut(), cache.agg_out.data());
        }

        let (g_agg_in, g_agg) = match (&self.aggregator, &cache.agg_cache) {
            (Aggregator::Dense(d), _) => {
                let flat = cache.agg_in.clone().reshape(&[n, d.input_dim()])?;
                let (gx, gp) = d.backward(&flat, &g_agg_out)?;
                (
                    gx.reshape(cache.agg_in.shape())?,
                    gp.params().into_iter().cloned().collect::<Vec<_>>(),
                )
            }
            (Aggregator::Conv(c), _) => {
                let (gx, gp) = c.backward(&cache.agg_in, &g_agg_out)?;
                (gx, gp.params().into_iter().cloned().collect())
            }
            (Aggregator::Gru(g), AggCache::Gru(gc)) => {
                let (gx, gp) = g.backward(&cache.agg_in, gc, &g_agg_out)?;
                (gx, gp.params().into_iter().cloned().collect())
            }
            (Aggregator::Lstm(l), AggCache::Lstm(lc)) => {
                let (gx, gp) = l.backward(&cache.agg_in, lc, &g_agg_out)?;
                (gx, gp.params().into_iter().cloned().collect())
            }
            _ => return Err(Error::shape("forward cache does not match aggregator")),
        };

        let mut g_input_out = g_agg_in;
        dropout_backward(&mut g_input_out, cache.mask1.as_deref());
        relu_backward_inplace(g_input_out.data_mut(), cache.input_out.data());
        let (_, g_input) = match self.kind {
            ArchitectureKind::Dense => {
                let flat = cache
                    .x
                    .clone()
                    .reshape(&[n, self.n_windows * self.n_features])?;
                self.input.backward(&flat, &g_input_out)?
            }
            _ => self.input.tdd_backward(&cache.x, &g_input_out)?,
        };

        let mut grads: Vec<Tensor> = g_input.params().into_iter().cloned().collect();
        grads.extend(g_agg);
        grads.extend(g_hidden.params().into_iter().cloned());
        grads.extend(g_output.params().into_iter().cloned());
        Ok(grads)
    }

    /// L1/L2 penalty over every weight matrix (biases excluded).
    pub fn penalty(&self) -> f64 {
        let hp = &self.hyperparams;
        let weights = self
            .params()
            .into_iter()
            .zip(self.penalized())
            .filter(|(_, p)| *p)
            .map(|(t, _)| t);
        penalty(weights, hp.l1, hp.l2)
    }

    /// Regularized training objective on a batch and its gradients.
    pub fn loss_and_grads(
        &self,
        x: &Tensor,
        labels: &[f64],
        rng: Option<&mut NetRng>,
    ) -> Result<(f64, Vec<Tensor>)> {
        let cache = self.forward(x, rng)?;
        let (data_loss, grad_logits) = bce_with_logits(&cache.logits, labels)?;
        let mut grads = self.backward(&cache, &grad_logits)?;
        let hp = &self.hyperparams;
        if hp.l1 != 0.0 || hp.l2 != 0.0 {
            for ((w, g), pen) in self
                .params()
                .into_iter()
                .zip(grads.iter_mut())
                .zip(self.penalized())
            {
                if pen {
                    add_penalty_grad(w, g, hp.l1, hp.l2);
                }
            }
        }
        Ok((data_loss + self.penalty(), grads))
    }

    /// Evaluation-mode probabilities.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self
            .forward(x, None)?
            .logits
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Evaluation-mode output of the hidden dense layer, `[n, units_dense]`.
    pub fn representation(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x, None)?.representation)
    }

    /// Applies the output unit to representations produced by
    /// [`Network::representation`].
    pub fn output_probabilities(&self, representation: &Tensor) -> Result<Vec<f64>> {
        Ok(self
            .output
            .forward(representation)?
            .into_data()
            .into_iter()
            .map(sigmoid)
            .collect())
    }
}

impl Parameters for Network {
    fn params(&self) -> Vec<&Tensor> {
        let mut out = self.input.params();
        out.extend(self.aggregator.layer().params());
        out.extend(self.hidden.params());
        out.extend(self.output.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.input.params_mut();
        out.extend(self.aggregator.layer_mut().params_mut());
        out.extend(self.hidden.params_mut());
        out.extend(self.output.params_mut());
        out
    }

    fn penalized(&self) -> Vec<bool> {
        self.layers().iter().flat_map(|l| l.penalized()).collect()
    }
}

fn apply_dropout(
    x: &Tensor,
    rate: f64,
    rng: &mut Option<&mut NetRng>,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    match rng.as_deref_mut() {
        Some(r) => dropout(x, rate, Mode::Train(r)),
        None => dropout::<NetRng>(x, rate, Mode::Eval),
    }
}
