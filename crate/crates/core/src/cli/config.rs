use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat key/value run configuration, read from TOML. Every key is optional;
/// command-line flags override file values.
///
/// ```toml
/// seed = 7
/// out = "run1"
/// n_patients = 578
/// signal_strength = 0.7
/// split_fractions = [0.638, 0.161, 0.201]
/// trials = 30
/// max_epochs = 200
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Cohort to split; defaults to `<out>/cohort.jsonl`.
    pub cohort: Option<PathBuf>,
    /// Schema of `cohort`; defaults to `<out>/schema.json`.
    pub schema: Option<PathBuf>,

    pub n_patients: usize,
    pub mean_visits: f64,
    pub visit_gap_median: f64,
    pub signal_strength: f64,
    pub prevalence_target: f64,
    pub noise_variables: usize,

    pub window_len: u32,
    pub n_windows: usize,
    pub split_fractions: Vec<f64>,

    pub kind: Option<String>,
    pub trials: usize,
    pub max_epochs: usize,
    pub batch_size: usize,

    pub rounds: usize,
    pub perplexity: f64,
    pub tsne_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            cohort: None,
            schema: None,
            n_patients: 578,
            mean_visits: 8.0,
            visit_gap_median: 100.0,
            signal_strength: 0.7,
            prevalence_target: 0.4,
            noise_variables: 0,
            window_len: 100,
            n_windows: 3,
            split_fractions: vec![0.638, 0.161, 0.201],
            kind: None,
            trials: 30,
            max_epochs: 200,
            batch_size: 64,
            rounds: 20,
            perplexity: 30.0,
            tsne_iterations: 1000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {}", path.display(), e.message())))
    }
}
