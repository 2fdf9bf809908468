use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Whether stochastic layers are active.
pub enum Mode<'a, R: Rng> {
    Train(&'a mut R),
    Eval,
}

/// Inverted dropout. Returns the output and the per-element scale that was
/// applied (0 or `1 / (1 - rate)`), which is also the backward multiplier.
/// In `Eval` mode, or with `rate == 0`, the input is returned unchanged and
/// no mask is produced.
pub fn dropout<R: Rng>(
    x: &Tensor,
    rate: f64,
    mode: Mode<'_, R>,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    match mode {
        Mode::Train(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = (0..x.len())
                .map(|_| {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                })
                .collect();
            let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
            Ok((Tensor::new(x.shape().to_vec(), data)?, Some(mask)))
        }
        _ => Ok((x.clone(), None)),
    }
}

pub fn dropout_backward(grad: &mut Tensor, mask: Option<&[f64]>) {
    if let Some(mask) = mask {
        for (g, m) in grad.data_mut().iter_mut().zip(mask) {
            *g *= m;
        }
    }
}
