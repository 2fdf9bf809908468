//! Differentiable layer kernels with hand-written gradients.
//!
//! Every layer exposes `forward` and `backward`; `backward` returns the
//! gradient with respect to the layer input together with a value of the
//! layer's own type holding the parameter gradients.

mod activation;
mod adam;
mod conv;
mod dense;
mod dropout;
mod gru;
pub mod init;
mod linalg;
mod loss;
mod lstm;
mod tensor;

pub use activation::{relu_backward_inplace, relu_inplace, sigmoid};
pub use adam::Adam;
pub use conv::{Conv1d, Padding};
pub use dense::Dense;
pub use dropout::{dropout, dropout_backward, Mode};
pub use gru::{Gru, GruCache};
pub use loss::{add_penalty_grad, bce, bce_with_logits, penalty, PROB_EPS};
pub use lstm::{Lstm, LstmCache};
pub use tensor::Tensor;

/// RNG used for initialisation and dropout.
pub type NetRng = rand_chacha::ChaCha8Rng;

/// Uniform access to a layer's trainable tensors.
pub trait Parameters {
    fn params(&self) -> Vec<&Tensor>;

    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    /// `true` for weight matrices (subject to L1/L2), `false` for biases.
    fn penalized(&self) -> Vec<bool>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
