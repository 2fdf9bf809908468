use serde::{Deserialize, Serialize};

use crate::arch::{model_input, TrainedModel};
use crate::cohort::WindowGrid;
use crate::error::{Error, Result};
use crate::metrics::{auroc, relative_difference, ScoredSet};
use crate::rng::substream;
use rand::Rng;

/// Where the replacement values for a cell were drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    /// Observed training values of this variable in this window.
    Window,
    /// No observation in this window; observed values from all windows.
    AllWindows,
    /// The variable is never observed in training; its imputed values in
    /// this window.
    Imputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceCell {
    pub variable: String,
    pub window: usize,
    pub relative_difference: f64,
    pub mean_permuted_auroc: f64,
    pub round_aurocs: Vec<f64>,
    pub pool: PoolSource,
}

/// Relative auROC change per (variable, window); rows are variables in
/// schema order, windows oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceHeatmap {
    pub variables: Vec<String>,
    pub n_windows: usize,
    pub rounds: usize,
    pub baseline_auroc: f64,
    pub cells: Vec<ImportanceCell>,
}

impl ImportanceHeatmap {
    pub fn cell(&self, variable: usize, window: usize) -> &ImportanceCell {
        &self.cells[variable * self.n_windows + window]
    }

    /// The cell with the lowest relative difference.
    pub fn most_negative(&self) -> &ImportanceCell {
        self.cells
            .iter()
            .min_by(|a, b| a.relative_difference.total_cmp(&b.relative_difference))
            .expect("heatmap has cells")
    }
}

fn score(model: &TrainedModel, x: &crate::nn::Tensor, y: &[f64]) -> Result<f64> {
    let p = model.network.predict(x)?;
    auroc(&ScoredSet::from_f64_labels(p, y)?)
}

/// Longitudinal permutation importance. For every (variable, window) and
/// round, each test patient's cell is replaced by a value drawn with
/// replacement from the standardized training values of that cell; the
/// cell's score is the relative difference between the mean permuted
/// auROC and the unmodified auROC. Round `r` of cell `(v, w)` uses its own
/// RNG stream, so results do not depend on evaluation order.
pub fn permutation_importance(
    model: &TrainedModel,
    test: &[WindowGrid],
    train: &[WindowGrid],
    rounds: usize,
    seed: u64,
) -> Result<ImportanceHeatmap> {
    if rounds == 0 {
        return Err(Error::invalid("rounds must be at least 1"));
    }
    if train.is_empty() {
        return Err(Error::data("training grids are empty"));
    }
    let schema = &model.preprocessing.schema;
    let w_count = model.network.n_windows;
    for g in train {
        if g.n_features != schema.len() || g.n_windows != w_count {
            return Err(Error::data(format!(
                "training grid for `{}` does not match the model's {}x{} input",
                g.patient_id,
                w_count,
                schema.len()
            )));
        }
    }
    let test_set = model_input(model, test)?;
    let baseline = score(model, &test_set.x, &test_set.y)?;
    let f = schema.len();

    let mut cells = Vec::with_capacity(f * w_count);
    for v in 0..f {
        for w in 0..w_count {
            let (pool, source) = replacement_pool(train, v, w);
            let mut round_aurocs = Vec::with_capacity(rounds);
            for r in 0..rounds {
                let mut rng = substream(seed, &[v as u64, w as u64, r as u64]);
                let mut x = test_set.x.clone();
                let data = x.data_mut();
                for i in 0..test_set.len() {
                    data[(i * w_count + w) * f + v] = pool[rng.random_range(0..pool.len())];
                }
                round_aurocs.push(score(model, &x, &test_set.y)?);
            }
            let mean = round_aurocs.iter().sum::<f64>() / rounds as f64;
            cells.push(ImportanceCell {
                variable: schema.get(v).name.clone(),
                window: w,
                relative_difference: relative_difference(mean, baseline)?,
                mean_permuted_auroc: mean,
                round_aurocs,
                pool: source,
            });
        }
    }
    Ok(ImportanceHeatmap {
        variables: schema.names().map(str::to_string).collect(),
        n_windows: w_count,
        rounds,
        baseline_auroc: baseline,
        cells,
    })
}

fn replacement_pool(train: &[WindowGrid], v: usize, w: usize) -> (Vec<f64>, PoolSource) {
    let observed: Vec<f64> = train
        .iter()
        .filter(|g| g.observed(w, v))
        .map(|g| g.get(w, v))
        .collect();
    if !observed.is_empty() {
        return (observed, PoolSource::Window);
    }
    let pooled: Vec<f64> = train
        .iter()
        .flat_map(|g| {
            (0..g.n_windows)
                .filter(|&k| g.observed(k, v))
                .map(move |k| g.get(k, v))
        })
        .collect();
    if !pooled.is_empty() {
        return (pooled, PoolSource::AllWindows);
    }
    (
        train.iter().map(|g| g.get(w, v)).collect(),
        PoolSource::Imputed,
    )
}
