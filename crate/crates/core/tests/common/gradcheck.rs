//! Central finite differences against analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timeagg::arch::{ArchitectureKind, HyperParams, Network};
use timeagg::nn::{bce_with_logits, Conv1d, Dense, Gru, Lstm, NetRng, Padding, Parameters, Tensor};

pub const H: f64 = 1e-5;

/// Gradients smaller than this (in both routes) are compared absolutely,
/// since their relative error is dominated by cancellation in the
/// difference quotient.
pub const REL_FLOOR: f64 = 1e-4;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Checks a layer under the scalar objective `sum(forward(x) * proj)`,
/// for every parameter and every input element. Returns the maximum
/// relative error.
pub fn check_layer<L, F, B>(layer: &L, x: &Tensor, proj: &Tensor, forward: F, backward: B) -> f64
where
    L: Parameters + Clone,
    F: Fn(&L, &Tensor) -> Tensor,
    B: Fn(&L, &Tensor, &Tensor) -> (Tensor, L),
{
    let objective = |l: &L, x: &Tensor| dot(&forward(l, x), proj);
    let (gx, gp) = backward(layer, x, proj);
    let mut worst = 0.0f64;

    let n_params = layer.params().len();
    for p in 0..n_params {
        let len = layer.params()[p].len();
        for i in 0..len {
            let mut plus = layer.clone();
            plus.params_mut()[p].data_mut()[i] += H;
            let mut minus = layer.clone();
            minus.params_mut()[p].data_mut()[i] -= H;
            let numeric = (objective(&plus, x) - objective(&minus, x)) / (2.0 * H);
            worst = worst.max(rel_err(gp.params()[p].data()[i], numeric));
        }
    }
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let mut xm = x.clone();
        xm.data_mut()[i] -= H;
        let numeric = (objective(layer, &xp) - objective(layer, &xm)) / (2.0 * H);
        worst = worst.max(rel_err(gx.data()[i], numeric));
    }
    worst
}

pub fn dense_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = NetRng::seed_from_u64(seed);
    let mut layer = Dense::new(3, 2, &mut init);
    layer.bias = random_tensor(&[2], &mut rng);
    let x = random_tensor(&[4, 3], &mut rng);
    let proj = random_tensor(&[4, 2], &mut rng);
    check_layer(
        &layer,
        &x,
        &proj,
        |l, x| l.forward(x).unwrap(),
        |l, x, g| l.backward(x, g).unwrap(),
    )
}

pub fn tdd_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = NetRng::seed_from_u64(seed);
    let mut layer = Dense::new(5, 4, &mut init);
    layer.bias = random_tensor(&[4], &mut rng);
    let x = random_tensor(&[2, 3, 5], &mut rng);
    let proj = random_tensor(&[2, 3, 4], &mut rng);
    check_layer(
        &layer,
        &x,
        &proj,
        |l, x| l.tdd_forward(x).unwrap(),
        |l, x, g| l.tdd_backward(x, g).unwrap(),
    )
}

pub fn conv_instance(seed: u64, padding: Padding) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = NetRng::seed_from_u64(seed);
    let k = 1 + (seed as usize % 3);
    let mut layer = Conv1d::new(k, 4, 3, padding, &mut init);
    layer.bias = random_tensor(&[3], &mut rng);
    let x = random_tensor(&[2, 3, 4], &mut rng);
    let out_len = layer.output_len(3).unwrap();
    let proj = random_tensor(&[2, out_len, 3], &mut rng);
    check_layer(
        &layer,
        &x,
        &proj,
        |l, x| l.forward(x).unwrap(),
        |l, x, g| l.backward(x, g).unwrap(),
    )
}

pub fn gru_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = NetRng::seed_from_u64(seed);
    let mut layer = Gru::new(5, 4, &mut init);
    for b in [&mut layer.bz, &mut layer.br, &mut layer.bh] {
        *b = random_tensor(&[4], &mut rng);
    }
    let x = random_tensor(&[2, 3, 5], &mut rng);
    let proj = random_tensor(&[2, 4], &mut rng);
    check_layer(
        &layer,
        &x,
        &proj,
        |l, x| l.forward(x).unwrap(),
        |l, x, g| {
            let (_, cache) = l.forward_cached(x).unwrap();
            l.backward(x, &cache, g).unwrap()
        },
    )
}

pub fn lstm_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = NetRng::seed_from_u64(seed);
    let mut layer = Lstm::new(5, 4, &mut init);
    for b in [&mut layer.bi, &mut layer.bc, &mut layer.bo] {
        *b = random_tensor(&[4], &mut rng);
    }
    let x = random_tensor(&[2, 3, 5], &mut rng);
    let proj = random_tensor(&[2, 4], &mut rng);
    check_layer(
        &layer,
        &x,
        &proj,
        |l, x| l.forward(x).unwrap(),
        |l, x, g| {
            let (_, cache) = l.forward_cached(x).unwrap();
            l.backward(x, &cache, g).unwrap()
        },
    )
}

/// Output unit: dense(1) -> sigmoid -> mean BCE, differentiated through
/// the logit gradient `(p - y) / n`.
pub fn output_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = NetRng::seed_from_u64(seed);
    let mut layer = Dense::new(4, 1, &mut init);
    layer.bias = random_tensor(&[1], &mut rng);
    let x = random_tensor(&[6, 4], &mut rng);
    let y: Vec<f64> = (0..6).map(|i| (i % 2) as f64).collect();
    let loss = |l: &Dense, x: &Tensor| bce_with_logits(l.forward(x).unwrap().data(), &y).unwrap().0;
    let logits = layer.forward(&x).unwrap();
    let (_, g_logits) = bce_with_logits(logits.data(), &y).unwrap();
    let g_logits = Tensor::new(vec![6, 1], g_logits).unwrap();
    let (gx, gp) = layer.backward(&x, &g_logits).unwrap();

    let mut worst = 0.0f64;
    for p in 0..2 {
        for i in 0..layer.params()[p].len() {
            let mut plus = layer.clone();
            plus.params_mut()[p].data_mut()[i] += H;
            let mut minus = layer.clone();
            minus.params_mut()[p].data_mut()[i] -= H;
            let numeric = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * H);
            worst = worst.max(rel_err(gp.params()[p].data()[i], numeric));
        }
    }
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let mut xm = x.clone();
        xm.data_mut()[i] -= H;
        let numeric = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * H);
        worst = worst.max(rel_err(gx.data()[i], numeric));
    }
    worst
}

/// Whole network, regularized loss (L1 + L2 on weights), dropout off.
pub fn network_instance(seed: u64, kind: ArchitectureKind) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = NetRng::seed_from_u64(seed);
    let hp = HyperParams {
        units_input: 4,
        units_agg: 3,
        units_dense: 3,
        l1: 1e-3,
        l2: 1e-2,
        dropout: 0.0,
        conv_kernel: 2,
    };
    let mut net = Network::build(kind, &hp, 4, 3, &mut init).unwrap();
    // Non-zero biases so no ReLU sits exactly on its kink.
    let n_params = net.params().len();
    for p in 0..n_params {
        if !net.penalized()[p] {
            let t = net.params()[p].clone();
            *net.params_mut()[p] = random_tensor(t.shape(), &mut rng);
        }
    }
    let x = random_tensor(&[5, 3, 4], &mut rng);
    let y: Vec<f64> = (0..5).map(|i| (i % 2) as f64).collect();
    let (_, grads) = net.loss_and_grads(&x, &y, None).unwrap();
    let loss = |n: &Network| n.loss_and_grads(&x, &y, None).unwrap().0;

    let mut worst = 0.0f64;
    for p in 0..n_params {
        for i in 0..net.params()[p].len() {
            let mut plus = net.clone();
            plus.params_mut()[p].data_mut()[i] += H;
            let mut minus = net.clone();
            minus.params_mut()[p].data_mut()[i] -= H;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * H);
            worst = worst.max(rel_err(grads[p].data()[i], numeric));
        }
    }
    worst
}
