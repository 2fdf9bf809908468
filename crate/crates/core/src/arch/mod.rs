//! The six time-aggregation architectures, their training loop, and
//! inference helpers.
//!
//! Every architecture has the same skeleton: an input layer, a time
//! aggregation layer, a hidden dense layer and a sigmoid output.
//!
//! | kind             | input layer        | aggregation                     |
//! |------------------|--------------------|---------------------------------|
//! | `dense`          | dense on flattened | dense                           |
//! | `tdd_dense`      | time-distributed   | flatten + dense                 |
//! | `tdd_gru`        | time-distributed   | GRU, last state                 |
//! | `tdd_lstm`       | time-distributed   | LSTM, last state                |
//! | `tdd_cnn_valid`  | time-distributed   | valid conv1d + flatten          |
//! | `tdd_cnn_causal` | time-distributed   | causal conv1d + flatten         |
//!
//! Hidden dense and time-distributed layers use ReLU.

mod network;
mod train;

pub use network::{Aggregator, ForwardCache, Network};
pub use train::{
    best_epoch, extract_representation, fit, model_input, predict, train, EpochRecord, Fit,
    Preprocessing, TrainConfig, TrainedModel,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::WindowGrid;
use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureKind {
    Dense,
    TddDense,
    TddGru,
    TddLstm,
    TddCnnValid,
    TddCnnCausal,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 6] = [
        ArchitectureKind::Dense,
        ArchitectureKind::TddDense,
        ArchitectureKind::TddGru,
        ArchitectureKind::TddLstm,
        ArchitectureKind::TddCnnValid,
        ArchitectureKind::TddCnnCausal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArchitectureKind::Dense => "dense",
            ArchitectureKind::TddDense => "tdd_dense",
            ArchitectureKind::TddGru => "tdd_gru",
            ArchitectureKind::TddLstm => "tdd_lstm",
            ArchitectureKind::TddCnnValid => "tdd_cnn_valid",
            ArchitectureKind::TddCnnCausal => "tdd_cnn_causal",
        }
    }

    /// Human-readable column label.
    pub fn label(self) -> &'static str {
        match self {
            ArchitectureKind::Dense => "Dense",
            ArchitectureKind::TddDense => "TDD Dense",
            ArchitectureKind::TddGru => "TDD GRU",
            ArchitectureKind::TddLstm => "TDD LSTM",
            ArchitectureKind::TddCnnValid => "TDD CNN",
            ArchitectureKind::TddCnnCausal => "TDD Causal CNN",
        }
    }

    pub fn is_conv(self) -> bool {
        matches!(
            self,
            ArchitectureKind::TddCnnValid | ArchitectureKind::TddCnnCausal
        )
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchitectureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchitectureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown architecture `{s}` (expected one of {})",
                    ArchitectureKind::ALL.map(|k| k.as_str()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub units_input: usize,
    pub units_agg: usize,
    pub units_dense: usize,
    pub l1: f64,
    pub l2: f64,
    pub dropout: f64,
    /// Only read by the convolutional kinds.
    #[serde(default = "default_kernel")]
    pub conv_kernel: usize,
}

fn default_kernel() -> usize {
    2
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            units_input: 16,
            units_agg: 16,
            units_dense: 8,
            l1: 1e-5,
            l2: 1e-4,
            dropout: 0.1,
            conv_kernel: default_kernel(),
        }
    }
}

impl HyperParams {
    pub fn validate(&self, kind: ArchitectureKind) -> Result<()> {
        if self.units_input == 0 || self.units_agg == 0 || self.units_dense == 0 {
            return Err(Error::invalid("unit counts must be positive"));
        }
        if !(self.l1 >= 0.0 && self.l1.is_finite() && self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("l1/l2 must be finite and non-negative"));
        }
        if !(0.0..=0.9).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout {} outside [0, 0.9]",
                self.dropout
            )));
        }
        if kind.is_conv() && self.conv_kernel == 0 {
            return Err(Error::invalid("conv_kernel must be positive"));
        }
        Ok(())
    }
}

/// Model-ready tensors: `x: [n, W, F]`, labels in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: Tensor,
    pub y: Vec<f64>,
}

impl Dataset {
    /// Stacks imputed grids. All grids must share one shape and contain no
    /// NaN.
    pub fn from_grids(grids: &[WindowGrid]) -> Result<Self> {
        let first = grids.first().ok_or_else(|| Error::data("no patients"))?;
        let (w, f) = (first.n_windows, first.n_features);
        let mut data = Vec::with_capacity(grids.len() * w * f);
        for g in grids {
            if g.n_windows != w || g.n_features != f {
                return Err(Error::shape(format!(
                    "grid for `{}` is {}x{}, expected {w}x{f}",
                    g.patient_id, g.n_windows, g.n_features
                )));
            }
            if g.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "grid for `{}` has non-finite cells; impute first",
                    g.patient_id
                )));
            }
            data.extend_from_slice(&g.values);
        }
        Ok(Dataset {
            ids: grids.iter().map(|g| g.patient_id.clone()).collect(),
            x: Tensor::new(vec![grids.len(), w, f], data)?,
            y: grids.iter().map(|g| g.outcome as f64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_windows(&self) -> usize {
        self.x.shape()[1]
    }

    pub fn n_features(&self) -> usize {
        self.x.shape()[2]
    }

    /// Rows `idx` as a new `[idx.len(), W, F]` tensor plus labels.
    pub fn batch(&self, idx: &[usize]) -> (Tensor, Vec<f64>) {
        let row = self.n_windows() * self.n_features();
        let mut data = Vec::with_capacity(idx.len() * row);
        for &i in idx {
            data.extend_from_slice(&self.x.data()[i * row..(i + 1) * row]);
        }
        let x = Tensor::new(vec![idx.len(), self.n_windows(), self.n_features()], data)
            .expect("rows of a valid tensor");
        (x, idx.iter().map(|&i| self.y[i]).collect())
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.x.shape()[1..] != other.x.shape()[1..] {
            return Err(Error::shape(
                "cannot concatenate datasets of different shapes",
            ));
        }
        let mut data = self.x.data().to_vec();
        data.extend_from_slice(other.x.data());
        Ok(Dataset {
            ids: self.ids.iter().chain(&other.ids).cloned().collect(),
            x: Tensor::new(
                vec![
                    self.len() + other.len(),
                    self.n_windows(),
                    self.n_features(),
                ],
                data,
            )?,
            y: self.y.iter().chain(&other.y).copied().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{NetRng, Parameters};
    use rand::SeedableRng;

    fn hp(u_in: usize, u_agg: usize, u_dense: usize) -> HyperParams {
        HyperParams {
            units_input: u_in,
            units_agg: u_agg,
            units_dense: u_dense,
            ..HyperParams::default()
        }
    }

    #[test]
    fn tdd_gru_parameter_count() {
        let mut rng = NetRng::seed_from_u64(0);
        let net = Network::build(ArchitectureKind::TddGru, &hp(8, 4, 4), 10, 3, &mut rng).unwrap();
        assert_eq!(net.param_count(), 88 + 156 + 20 + 5);
    }

    #[test]
    fn dense_flattens_windows() {
        let mut rng = NetRng::seed_from_u64(0);
        let net = Network::build(ArchitectureKind::Dense, &hp(8, 4, 4), 10, 3, &mut rng).unwrap();
        assert_eq!(net.input.input_dim(), 30);
    }

    #[test]
    fn valid_cnn_output_width() {
        let mut rng = NetRng::seed_from_u64(0);
        let net =
            Network::build(ArchitectureKind::TddCnnValid, &hp(8, 5, 4), 10, 3, &mut rng).unwrap();
        assert_eq!(net.aggregation_width(), 2 * 5);
        let causal = Network::build(
            ArchitectureKind::TddCnnCausal,
            &hp(8, 5, 4),
            10,
            3,
            &mut rng,
        )
        .unwrap();
        assert_eq!(causal.aggregation_width(), 3 * 5);
        let too_wide = HyperParams {
            conv_kernel: 4,
            ..hp(8, 5, 4)
        };
        assert!(Network::build(ArchitectureKind::TddCnnValid, &too_wide, 10, 3, &mut rng).is_err());
    }

    #[test]
    fn skeleton_has_four_parameterised_layers() {
        let mut rng = NetRng::seed_from_u64(0);
        for kind in ArchitectureKind::ALL {
            let net = Network::build(kind, &hp(8, 4, 4), 10, 3, &mut rng).unwrap();
            let per_layer = match kind {
                ArchitectureKind::TddGru => 9,
                ArchitectureKind::TddLstm => 12,
                _ => 2,
            };
            assert_eq!(net.params().len(), 2 + per_layer + 2 + 2, "{kind}");
            assert_eq!(net.output.output_dim(), 1);
            assert_eq!(net.representation_width(), 4);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ArchitectureKind::ALL {
            assert_eq!(kind.as_str().parse::<ArchitectureKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.as_str()));
        }
        assert!("rnn".parse::<ArchitectureKind>().is_err());
    }

    #[test]
    fn hyperparams_validation() {
        let k = ArchitectureKind::Dense;
        assert!(HyperParams::default().validate(k).is_ok());
        assert!(HyperParams {
            dropout: 0.95,
            ..Default::default()
        }
        .validate(k)
        .is_err());
        assert!(HyperParams {
            l1: -1.0,
            ..Default::default()
        }
        .validate(k)
        .is_err());
        assert!(HyperParams {
            units_agg: 0,
            ..Default::default()
        }
        .validate(k)
        .is_err());
    }
}
