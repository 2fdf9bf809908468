//! Irregular longitudinal patient records and their conversion into fixed
//! window grids.
//!
//! A patient's visits are bucketed into `n_windows` windows of `window_len`
//! days, anchored backward from the index (most recent) visit. Window
//! `w` covers the half-open day range
//! `(index_day - (W - w) * L, index_day - (W - w - 1) * L]`, so the last
//! window always holds the index visit and a visit sitting exactly on a
//! boundary belongs to the later window. Within a window each variable keeps
//! its most recent observation.

mod io;

pub use io::{read_cohort, read_schema, write_cohort, write_grids_csv, write_schema};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are treated as a constant feature.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(skip)]
    pub column_index: usize,
}

/// Ordered list of model input variables. Column indices always run
/// `0..len` in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    variables: Vec<VariableSpec>,
}

impl Schema {
    pub fn new<I, S>(vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, VariableKind)>,
        S: Into<String>,
    {
        let mut variables: Vec<VariableSpec> = Vec::new();
        for (column_index, (name, kind)) in vars.into_iter().enumerate() {
            let name = name.into();
            if name.is_empty() {
                return Err(Error::data("empty variable name in schema"));
            }
            if variables.iter().any(|v| v.name == name) {
                return Err(Error::data(format!(
                    "duplicate variable `{name}` in schema"
                )));
            }
            variables.push(VariableSpec {
                name,
                kind,
                column_index,
            });
        }
        if variables.is_empty() {
            return Err(Error::data("schema has no variables"));
        }
        Ok(Schema { variables })
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn get(&self, index: usize) -> &VariableSpec {
        &self.variables[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.name.as_str())
    }
}

impl Serialize for Schema {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.variables.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let vars = Vec::<VariableSpec>::deserialize(d)?;
        Schema::new(vars.into_iter().map(|v| (v.name, v.kind))).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Controlled,
    Uncontrolled,
}

impl Outcome {
    /// 1 for `Uncontrolled`, 0 otherwise.
    pub fn label(self) -> u8 {
        match self {
            Outcome::Controlled => 0,
            Outcome::Uncontrolled => 1,
        }
    }

    pub fn from_label(label: u8) -> Self {
        if label == 0 {
            Outcome::Controlled
        } else {
            Outcome::Uncontrolled
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    /// Days since the patient's first recorded visit.
    pub day: u32,
    pub observations: BTreeMap<String, f64>,
}

impl Visit {
    pub fn new(day: u32) -> Self {
        Visit {
            day,
            observations: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.observations.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patient {
    id: String,
    visits: Vec<Visit>,
    outcome: Outcome,
}

impl Patient {
    /// Visits must be non-empty and strictly increasing by day.
    pub fn new(id: impl Into<String>, visits: Vec<Visit>, outcome: Outcome) -> Result<Self> {
        let id = id.into();
        if visits.is_empty() {
            return Err(Error::data(format!("patient `{id}` has no visits")));
        }
        if let Some(w) = visits.windows(2).find(|w| w[0].day >= w[1].day) {
            return Err(Error::data(format!(
                "patient `{id}`: visits not strictly increasing (day {} then {})",
                w[0].day, w[1].day
            )));
        }
        Ok(Patient {
            id,
            visits,
            outcome,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn visits(&self) -> &[Visit] {
        &self.visits
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    /// Day of the final visit; the prediction anchor.
    pub fn index_day(&self) -> u32 {
        self.visits[self.visits.len() - 1].day
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub schema: Schema,
    pub patients: Vec<Patient>,
}

impl Cohort {
    /// Checks every observation against the schema: names must be known,
    /// values finite, and binary variables exactly 0 or 1.
    pub fn new(schema: Schema, patients: Vec<Patient>) -> Result<Self> {
        for p in &patients {
            for v in p.visits() {
                for (name, &value) in &v.observations {
                    let idx = schema.index_of(name).ok_or_else(|| {
                        Error::data(format!(
                            "patient `{}` day {}: unknown variable `{name}`",
                            p.id(),
                            v.day
                        ))
                    })?;
                    check_value(schema.get(idx), value).map_err(|msg| {
                        Error::data(format!("patient `{}` day {}: {msg}", p.id(), v.day))
                    })?;
                }
            }
        }
        Ok(Cohort { schema, patients })
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn prevalence(&self) -> f64 {
        if self.patients.is_empty() {
            return 0.0;
        }
        let pos = self
            .patients
            .iter()
            .filter(|p| p.outcome() == Outcome::Uncontrolled)
            .count();
        pos as f64 / self.patients.len() as f64
    }
}

fn check_value(spec: &VariableSpec, value: f64) -> std::result::Result<(), String> {
    if !value.is_finite() {
        return Err(format!("`{}` is not finite", spec.name));
    }
    if spec.kind == VariableKind::Binary && value != 0.0 && value != 1.0 {
        return Err(format!("binary variable `{}` has value {value}", spec.name));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_len: u32,
    pub n_windows: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_len: 100,
            n_windows: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowAssignment {
    Window(usize),
    Discarded,
}

/// Maps each visit (in order) to its window.
pub fn assign_windows(patient: &Patient, cfg: WindowConfig) -> Vec<WindowAssignment> {
    let index = patient.index_day();
    patient
        .visits()
        .iter()
        .map(|v| assign_day(v.day, index, cfg))
        .collect()
}

fn assign_day(day: u32, index_day: u32, cfg: WindowConfig) -> WindowAssignment {
    debug_assert!(day <= index_day);
    let back = ((index_day - day) / cfg.window_len) as usize;
    if back < cfg.n_windows {
        WindowAssignment::Window(cfg.n_windows - 1 - back)
    } else {
        WindowAssignment::Discarded
    }
}

/// Most recent value of each schema variable across `visits`. The visits
/// are expected in ascending day order.
pub fn aggregate_window(visits: &[&Visit], schema: &Schema) -> Vec<Option<f64>> {
    let mut out = vec![None; schema.len()];
    let mut latest = vec![0u32; schema.len()];
    for v in visits {
        for (name, &value) in &v.observations {
            if let Some(i) = schema.index_of(name) {
                if out[i].is_none() || v.day >= latest[i] {
                    out[i] = Some(value);
                    latest[i] = v.day;
                }
            }
        }
    }
    out
}

/// Per-patient `W x F` model input. Before imputation, unobserved cells are
/// NaN; afterwards every cell is finite and `mask` records what was
/// actually observed.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowGrid {
    pub patient_id: String,
    pub n_windows: usize,
    pub n_features: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    /// 1 = Uncontrolled.
    pub outcome: u8,
}

impl WindowGrid {
    pub fn get(&self, window: usize, feature: usize) -> f64 {
        self.values[window * self.n_features + feature]
    }

    pub fn set(&mut self, window: usize, feature: usize, value: f64) {
        self.values[window * self.n_features + feature] = value;
    }

    pub fn observed(&self, window: usize, feature: usize) -> bool {
        self.mask[window * self.n_features + feature]
    }
}

/// Windows and aggregates one patient. Missing cells hold NaN.
pub fn build_grid(patient: &Patient, schema: &Schema, cfg: WindowConfig) -> WindowGrid {
    let assignment = assign_windows(patient, cfg);
    let f = schema.len();
    let mut values = vec![f64::NAN; cfg.n_windows * f];
    let mut mask = vec![false; cfg.n_windows * f];
    for w in 0..cfg.n_windows {
        let in_window: Vec<&Visit> = patient
            .visits()
            .iter()
            .zip(&assignment)
            .filter(|(_, a)| **a == WindowAssignment::Window(w))
            .map(|(v, _)| v)
            .collect();
        for (i, value) in aggregate_window(&in_window, schema).into_iter().enumerate() {
            if let Some(x) = value {
                values[w * f + i] = x;
                mask[w * f + i] = true;
            }
        }
    }
    WindowGrid {
        patient_id: patient.id().to_string(),
        n_windows: cfg.n_windows,
        n_features: f,
        values,
        mask,
        outcome: patient.outcome().label(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

/// Mean and standard deviation of each continuous variable, fit on the
/// training split's observed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub features: Vec<FeatureStats>,
}

impl StandardizationStats {
    /// Population moments over every observed cell (all windows) of the
    /// continuous variables. A variable never observed gets mean 0, std 1.
    pub fn fit(grids: &[WindowGrid], schema: &Schema) -> Self {
        let features = schema
            .variables()
            .iter()
            .filter(|v| v.kind == VariableKind::Continuous)
            .map(|v| {
                let xs: Vec<f64> = grids
                    .iter()
                    .flat_map(|g| {
                        (0..g.n_windows)
                            .filter(|&w| g.observed(w, v.column_index))
                            .map(move |w| g.get(w, v.column_index))
                    })
                    .collect();
                let (mean, std) = if xs.is_empty() {
                    (0.0, 1.0)
                } else {
                    let n = xs.len() as f64;
                    let mean = xs.iter().sum::<f64>() / n;
                    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    (mean, var.sqrt())
                };
                FeatureStats {
                    name: v.name.clone(),
                    mean,
                    std: if std < MIN_STD { 1.0 } else { std },
                }
            })
            .collect();
        StandardizationStats { features }
    }

    pub fn get(&self, name: &str) -> Option<&FeatureStats> {
        self.features.iter().find(|f| f.name == name)
    }

    fn require(&self, name: &str) -> Result<&FeatureStats> {
        self.get(name)
            .ok_or_else(|| Error::data(format!("standardization stats missing variable `{name}`")))
    }
}

/// Forward-fills each variable across windows, then fills what is still
/// missing with the training mean (continuous) or 0 (binary).
pub fn impute(
    grid: &WindowGrid,
    schema: &Schema,
    stats: &StandardizationStats,
) -> Result<WindowGrid> {
    let mut out = grid.clone();
    for spec in schema.variables() {
        let j = spec.column_index;
        let fallback = match spec.kind {
            VariableKind::Continuous => stats.require(&spec.name)?.mean,
            VariableKind::Binary => 0.0,
        };
        let mut carry: Option<f64> = None;
        for w in 0..out.n_windows {
            let x = out.get(w, j);
            if out.observed(w, j) && x.is_finite() {
                carry = Some(x);
            } else {
                out.set(w, j, carry.unwrap_or(fallback));
            }
        }
    }
    Ok(out)
}

/// `(x - mean) / std` on continuous cells; binary cells pass through.
pub fn standardize(
    grids: &[WindowGrid],
    schema: &Schema,
    stats: &StandardizationStats,
) -> Result<Vec<WindowGrid>> {
    let cont: Vec<(usize, f64, f64)> = schema
        .variables()
        .iter()
        .filter(|v| v.kind == VariableKind::Continuous)
        .map(|v| {
            stats
                .require(&v.name)
                .map(|s| (v.column_index, s.mean, s.std))
        })
        .collect::<Result<_>>()?;
    Ok(grids
        .iter()
        .map(|g| {
            let mut g = g.clone();
            for w in 0..g.n_windows {
                for &(j, mean, std) in &cont {
                    let x = g.get(w, j);
                    g.set(w, j, (x - mean) / std);
                }
            }
            g
        })
        .collect())
}

/// Builds, imputes and standardizes grids for every patient of `cohort`.
pub fn prepare_grids(
    cohort: &Cohort,
    cfg: WindowConfig,
    stats: &StandardizationStats,
) -> Result<Vec<WindowGrid>> {
    let raw = raw_grids(cohort, cfg);
    let imputed = raw
        .iter()
        .map(|g| impute(g, &cohort.schema, stats))
        .collect::<Result<Vec<_>>>()?;
    standardize(&imputed, &cohort.schema, stats)
}

pub fn raw_grids(cohort: &Cohort, cfg: WindowConfig) -> Vec<WindowGrid> {
    cohort
        .patients
        .iter()
        .map(|p| build_grid(p, &cohort.schema, cfg))
        .collect()
}

/// Largest-remainder apportionment of `total` by `fractions`. Ties go to
/// the earlier index.
pub fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    sizes
}

/// Stratified random split on the outcome.
///
/// Overall split sizes come from largest-remainder rounding of
/// `fractions * n`. Each class then receives `floor(n_c * size_k / n)` per
/// split, and the leftover seats of each split are handed out class by
/// class (Controlled first) to the splits with the largest fractional
/// quota; ties between splits are broken by the seeded RNG. Patients keep
/// their original relative order within a split.
pub fn stratified_split(cohort: &Cohort, fractions: &[f64], seed: u64) -> Result<Vec<Cohort>> {
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::invalid("split fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "split fractions sum to {total}, not 1"
        )));
    }
    let k = fractions.len();
    let n = cohort.len();
    let classes = [Outcome::Controlled, Outcome::Uncontrolled];
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| {
            (0..n)
                .filter(|&i| cohort.patients[i].outcome() == c)
                .collect()
        })
        .collect();
    for (c, m) in classes.iter().zip(&members) {
        if m.len() < k {
            return Err(Error::data(format!(
                "class {c:?} has {} patients, too few for {k} splits",
                m.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = largest_remainder(n, fractions);
    let mut remaining: Vec<usize> = sizes.clone();
    let mut counts: Vec<Vec<usize>> = Vec::with_capacity(classes.len());
    let mut fracs: Vec<Vec<f64>> = Vec::with_capacity(classes.len());
    for m in &members {
        let quotas: Vec<f64> = sizes
            .iter()
            .map(|&s| m.len() as f64 * s as f64 / n as f64)
            .collect();
        let floors: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        for (r, f) in remaining.iter_mut().zip(&floors) {
            *r -= f;
        }
        fracs.push(quotas.iter().map(|q| q - q.floor()).collect());
        counts.push(floors);
    }
    for (ci, m) in members.iter().enumerate() {
        let mut extra = m.len() - counts[ci].iter().sum::<usize>();
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        order.sort_by(|&a, &b| fracs[ci][b].total_cmp(&fracs[ci][a]));
        // A class can need more than one extra seat per split only if the
        // earlier classes already used up the other splits.
        while extra > 0 {
            let before = extra;
            for &s in &order {
                if extra > 0 && remaining[s] > 0 {
                    counts[ci][s] += 1;
                    remaining[s] -= 1;
                    extra -= 1;
                }
            }
            if before == extra {
                return Err(Error::data("split apportionment failed"));
            }
        }
    }

    let mut split_of = vec![0usize; n];
    for (ci, m) in members.iter().enumerate() {
        let mut shuffled = m.clone();
        shuffled.shuffle(&mut rng);
        let mut at = 0;
        for (s, &c) in counts[ci].iter().enumerate() {
            for &i in &shuffled[at..at + c] {
                split_of[i] = s;
            }
            at += c;
        }
    }
    Ok((0..k)
        .map(|s| Cohort {
            schema: cohort.schema.clone(),
            patients: (0..n)
                .filter(|&i| split_of[i] == s)
                .map(|i| cohort.patients[i].clone())
                .collect(),
        })
        .collect())
}
