//! Tree-structured Parzen Estimator search over architecture
//! hyperparameters.
//!
//! Each dimension is modelled independently: completed trials are split at
//! the `gamma` quantile of their objective into a good set and a bad set,
//! each set gets a one-dimensional density (Gaussian KDE on the log or
//! linear scale, smoothed frequencies for choices), and the value is the
//! candidate drawn from the good density with the highest good/bad ratio.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arch::{fit, ArchitectureKind, Dataset, HyperParams, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::substream;

const STREAM_SUGGEST: u64 = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Shared grid for the three layer widths.
    pub units: Vec<usize>,
    pub l1: (f64, f64),
    pub l2: (f64, f64),
    pub dropout: (f64, f64),
    /// Empty for non-convolutional kinds; the kernel then stays at its
    /// default.
    pub conv_kernel: Vec<usize>,
}

impl SearchSpace {
    pub fn for_kind(kind: ArchitectureKind) -> Self {
        SearchSpace {
            units: vec![4, 8, 16, 32, 64],
            l1: (1e-6, 1e-1),
            l2: (1e-6, 1e-1),
            dropout: (0.0, 0.5),
            conv_kernel: if kind.is_conv() {
                vec![2, 3]
            } else {
                Vec::new()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.units.is_empty() || self.units.contains(&0) {
            return Err(Error::invalid("units grid must be non-empty and positive"));
        }
        for (name, (lo, hi)) in [("l1", self.l1), ("l2", self.l2)] {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} bounds must satisfy 0 < lo < hi"
                )));
            }
        }
        let (lo, hi) = self.dropout;
        if !(0.0 <= lo && lo < hi && hi <= 0.9) {
            return Err(Error::invalid(
                "dropout bounds must satisfy 0 <= lo < hi <= 0.9",
            ));
        }
        if self.conv_kernel.contains(&0) {
            return Err(Error::invalid("conv kernel sizes must be positive"));
        }
        Ok(())
    }

    /// Uniform draw: choices uniformly, l1/l2 log-uniformly, dropout
    /// uniformly.
    pub fn sample_uniform(&self, rng: &mut impl Rng) -> HyperParams {
        let log_uniform = |(lo, hi): (f64, f64), rng: &mut dyn rand::RngCore| {
            rng.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
        };
        HyperParams {
            units_input: *self.units.choose(rng).unwrap(),
            units_agg: *self.units.choose(rng).unwrap(),
            units_dense: *self.units.choose(rng).unwrap(),
            l1: log_uniform(self.l1, rng),
            l2: log_uniform(self.l2, rng),
            dropout: rng.random_range(self.dropout.0..=self.dropout.1),
            conv_kernel: self.conv_kernel.choose(rng).copied().unwrap_or(2),
        }
    }

    pub fn contains(&self, hp: &HyperParams) -> bool {
        let within = |x: f64, (lo, hi): (f64, f64)| lo <= x && x <= hi;
        self.units.contains(&hp.units_input)
            && self.units.contains(&hp.units_agg)
            && self.units.contains(&hp.units_dense)
            && within(hp.l1, self.l1)
            && within(hp.l2, self.l2)
            && within(hp.dropout, self.dropout)
            && (self.conv_kernel.is_empty() || self.conv_kernel.contains(&hp.conv_kernel))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hyperparams: HyperParams,
    /// Validation loss at the checkpoint; `+inf` for failed trials (written
    /// as `null`).
    #[serde(serialize_with = "ser_objective", deserialize_with = "de_objective")]
    pub objective: f64,
    pub seed: u64,
    pub status: TrialStatus,
}

fn ser_objective<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_some(x)
    } else {
        s.serialize_none()
    }
}

fn de_objective<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
    pub bandwidth_floor: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
            bandwidth_floor: 1e-3,
        }
    }
}

/// Gaussian KDE on one transformed axis, mixed with a uniform prior over
/// the bounds that counts as one extra observation. The bandwidth is
/// Scott's rule, but never below `floor` nor below `(hi - lo) / min(100,
/// n + 1)`. Samples are clipped to the bounds.
struct Kde {
    centers: Vec<f64>,
    bandwidth: f64,
    lo: f64,
    hi: f64,
}

impl Kde {
    fn fit(points: Vec<f64>, (lo, hi): (f64, f64), floor: f64) -> Self {
        let n = points.len() as f64;
        let mean = points.iter().sum::<f64>() / n;
        let std = (points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
        Kde {
            bandwidth: (std * n.powf(-0.2))
                .max(floor)
                .max((hi - lo) / (n + 1.0).min(100.0)),
            centers: points,
            lo,
            hi,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let k = rng.random_range(0..=self.centers.len());
        if k == self.centers.len() {
            return rng.random_range(self.lo..=self.hi);
        }
        let x = self.centers[k] + self.bandwidth * Normal::new(0.0, 1.0).unwrap().sample(rng);
        x.clamp(self.lo, self.hi)
    }

    fn log_density(&self, x: f64) -> f64 {
        let norm = self.bandwidth * (2.0 * std::f64::consts::PI).sqrt();
        let kernels: f64 = self
            .centers
            .iter()
            .map(|c| (-0.5 * ((x - c) / self.bandwidth).powi(2)).exp() / norm)
            .sum();
        ((kernels + 1.0 / (self.hi - self.lo)) / (self.centers.len() + 1) as f64).ln()
    }
}

fn best_continuous(
    good: Vec<f64>,
    bad: Vec<f64>,
    (lo, hi): (f64, f64),
    cfg: &TpeConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let l = Kde::fit(good, (lo, hi), cfg.bandwidth_floor);
    let g = Kde::fit(bad, (lo, hi), cfg.bandwidth_floor);
    let mut best = (f64::NEG_INFINITY, lo);
    for _ in 0..cfg.n_candidates {
        let x = l.sample(rng);
        let score = l.log_density(x) - g.log_density(x);
        if score > best.0 {
            best = (score, x);
        }
    }
    best.1
}

fn best_choice(
    good: &[usize],
    bad: &[usize],
    choices: &[usize],
    cfg: &TpeConfig,
    rng: &mut ChaCha8Rng,
) -> usize {
    let k = choices.len() as f64;
    let mass = |set: &[usize], c: usize| {
        (set.iter().filter(|&&v| v == c).count() as f64 + 1.0) / (set.len() as f64 + k)
    };
    let l: Vec<f64> = choices.iter().map(|&c| mass(good, c)).collect();
    let mut best = (f64::NEG_INFINITY, choices[0]);
    for _ in 0..cfg.n_candidates {
        let mut u: f64 = rng.random();
        let mut pick = choices.len() - 1;
        for (i, p) in l.iter().enumerate() {
            if u < *p {
                pick = i;
                break;
            }
            u -= p;
        }
        let c = choices[pick];
        let score = (l[pick] / mass(bad, c)).ln();
        if score > best.0 {
            best = (score, c);
        }
    }
    best.1
}

/// Next hyperparameters to try, given the study so far.
pub fn suggest(
    history: &[Trial],
    space: &SearchSpace,
    cfg: &TpeConfig,
    rng: &mut ChaCha8Rng,
) -> HyperParams {
    let mut done: Vec<&Trial> = history
        .iter()
        .filter(|t| t.status == TrialStatus::Complete && t.objective.is_finite())
        .collect();
    if done.len() < cfg.n_startup.max(2) {
        return space.sample_uniform(rng);
    }
    if done.iter().all(|t| t.objective == done[0].objective) {
        return space.sample_uniform(rng);
    }
    done.sort_by(|a, b| {
        a.objective
            .total_cmp(&b.objective)
            .then(a.index.cmp(&b.index))
    });
    let n_good = ((cfg.gamma * done.len() as f64).ceil() as usize).clamp(1, done.len() - 1);
    let (good, bad) = done.split_at(n_good);

    let ln = |(lo, hi): (f64, f64)| (lo.ln(), hi.ln());
    let axis = |f: &dyn Fn(&HyperParams) -> f64, set: &[&Trial]| -> Vec<f64> {
        set.iter().map(|t| f(&t.hyperparams)).collect()
    };
    let choice = |f: &dyn Fn(&HyperParams) -> usize, set: &[&Trial]| -> Vec<usize> {
        set.iter().map(|t| f(&t.hyperparams)).collect()
    };

    let units_input = best_choice(
        &choice(&|h| h.units_input, good),
        &choice(&|h| h.units_input, bad),
        &space.units,
        cfg,
        rng,
    );
    let units_agg = best_choice(
        &choice(&|h| h.units_agg, good),
        &choice(&|h| h.units_agg, bad),
        &space.units,
        cfg,
        rng,
    );
    let units_dense = best_choice(
        &choice(&|h| h.units_dense, good),
        &choice(&|h| h.units_dense, bad),
        &space.units,
        cfg,
        rng,
    );
    let l1 = best_continuous(
        axis(&|h| h.l1.ln(), good),
        axis(&|h| h.l1.ln(), bad),
        ln(space.l1),
        cfg,
        rng,
    )
    .exp()
    .clamp(space.l1.0, space.l1.1);
    let l2 = best_continuous(
        axis(&|h| h.l2.ln(), good),
        axis(&|h| h.l2.ln(), bad),
        ln(space.l2),
        cfg,
        rng,
    )
    .exp()
    .clamp(space.l2.0, space.l2.1);
    let dropout = best_continuous(
        axis(&|h| h.dropout, good),
        axis(&|h| h.dropout, bad),
        space.dropout,
        cfg,
        rng,
    );
    let conv_kernel = if space.conv_kernel.is_empty() {
        2
    } else {
        best_choice(
            &choice(&|h| h.conv_kernel, good),
            &choice(&|h| h.conv_kernel, bad),
            &space.conv_kernel,
            cfg,
            rng,
        )
    };
    HyperParams {
        units_input,
        units_agg,
        units_dense,
        l1,
        l2,
        dropout,
        conv_kernel,
    }
}

/// Anything that scores hyperparameters; lower is better. Numeric failures
/// (`NonFiniteLoss`, `Numeric`) mark the trial failed; other errors abort
/// the study.
pub trait Objective {
    fn evaluate(&mut self, hp: &HyperParams, seed: u64) -> Result<f64>;
}

impl<F: FnMut(&HyperParams, u64) -> Result<f64>> Objective for F {
    fn evaluate(&mut self, hp: &HyperParams, seed: u64) -> Result<f64> {
        self(hp, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub trials: Vec<Trial>,
    /// Index into `trials`.
    pub best: usize,
}

impl Study {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Runs `n_trials` sequential suggest/evaluate rounds. Trial `i` is
/// evaluated with seed `seed + i`.
pub fn run_study(
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
    cfg: &TpeConfig,
    objective: &mut dyn Objective,
) -> Result<Study> {
    space.validate()?;
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    let mut rng = substream(seed, &[STREAM_SUGGEST]);
    let mut trials: Vec<Trial> = Vec::with_capacity(n_trials);
    for index in 0..n_trials {
        let hyperparams = suggest(&trials, space, cfg, &mut rng);
        let trial_seed = seed.wrapping_add(index as u64);
        let (objective, status) = match objective.evaluate(&hyperparams, trial_seed) {
            Ok(v) if v.is_finite() => (v, TrialStatus::Complete),
            Ok(_) | Err(Error::NonFiniteLoss { .. }) | Err(Error::Numeric(_)) => {
                (f64::INFINITY, TrialStatus::Failed)
            }
            Err(e) => return Err(e),
        };
        trials.push(Trial {
            index,
            hyperparams,
            objective,
            seed: trial_seed,
            status,
        });
    }
    let best = trials
        .iter()
        .filter(|t| t.status == TrialStatus::Complete)
        .min_by(|a, b| {
            a.objective
                .total_cmp(&b.objective)
                .then(a.index.cmp(&b.index))
        })
        .map(|t| t.index)
        .ok_or_else(|| Error::Numeric(format!("all {n_trials} trials failed")))?;
    Ok(Study { trials, best })
}

/// Study whose objective is the checkpointed validation loss of a real
/// training run.
pub fn run_training_study(
    kind: ArchitectureKind,
    space: &SearchSpace,
    n_trials: usize,
    train: &Dataset,
    val: &Dataset,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<Study> {
    let mut objective = |hp: &HyperParams, trial_seed: u64| -> Result<f64> {
        let cfg = TrainConfig {
            seed: trial_seed,
            ..train_cfg.clone()
        };
        Ok(fit(kind, hp, train, val, &cfg)?.best_val_loss())
    };
    run_study(space, n_trials, seed, &TpeConfig::default(), &mut objective)
}

/// One JSON object per trial per line.
pub fn write_study_log(path: impl AsRef<Path>, trials: &[Trial]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for t in trials {
        serde_json::to_writer(&mut out, t)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_study_log(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut trials = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        trials.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(trials)
}
