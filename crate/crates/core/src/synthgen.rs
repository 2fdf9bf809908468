//! Seeded generator of synthetic rheumatoid-arthritis-like cohorts.
//!
//! Each patient has a latent severity `s ~ N(0, 1)` that sets a personal
//! CDAI baseline `b = 14 + 8 s`. Disease activity follows an AR(1) process
//! around that baseline, pulled down by active DMARDs and prednisone:
//!
//! ```text
//! a[k+1] = b + rho (a[k] - b) - 3 (n_dmards - 1) - 4 pred[k] + N(0, 5^2)
//! ```
//!
//! with `rho = 0.3`. Prednisone is prescribed with probability
//! `sigmoid((cdai - threshold) / 4)`; after a visit with CDAI above the
//! control cut the regimen is escalated with probability `switch_rate`
//! (methotrexate first, then a biologic, then a conventional DMARD), which
//! sets `dmard_switch` at the following visit. ESR and CRP are noisy
//! monotone functions of CDAI. CDAI is recorded at 90% of visits, ESR and
//! CRP at 70%.
//!
//! The label is the next (unobserved) visit's activity against the cut:
//!
//! ```text
//! f    = b + rho (a_last - b) - 3 (n_dmards - 1) - 4 pred_last + k burden
//! next = signal f + (1 - signal) (14 + 9 z) + N(0, 3^2) + offset
//! ```
//!
//! `burden` is the share of the three 100-day bins before the index visit
//! whose latest visit was refractory: CDAI above the cut despite a biologic
//! or prednisone; its weight k is `refractory_effect` (40 by default). The
//! same rule applies to every bin, which is the kind of structure a shared
//! per-window transform can pick up. `z ~ N(0, 1)` is
//! independent of everything observed, so at `signal_strength = 0` the
//! label is independent of the record. `offset` is chosen so that a
//! fixed-seed pilot cohort hits `prevalence_target` exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Outcome, Patient, Schema, VariableKind, Visit};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};

pub const CONTINUOUS: [&str; 3] = ["cdai", "esr", "crp"];
pub const BINARY: [&str; 7] = [
    "prednisone",
    "mtx",
    "hcq",
    "ssz",
    "lef",
    "biologic",
    "dmard_switch",
];

const CDAI_MAX: f64 = 76.0;
const RHO: f64 = 0.3;
const DMARD_EFFECT: f64 = 3.0;
const PREDNISONE_EFFECT: f64 = 4.0;
const BURDEN_EFFECT: f64 = 40.0;
const BURDEN_BINS: usize = 3;
const BURDEN_BIN_DAYS: u32 = 100;
const PILOT_PATIENTS: usize = 4000;
const PILOT_SEED: u64 = 0x5eed_0f_c0_4017;

const STREAM_PATIENT: u64 = 1;
const STREAM_IDS: u64 = 2;

/// Provider treatment habits; the benchmark pair differs here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreatmentPattern {
    /// CDAI at which prednisone becomes a coin flip.
    pub prednisone_threshold: f64,
    /// Probability of escalating after an uncontrolled visit.
    pub switch_rate: f64,
    /// Probability of starting on a biologic.
    pub initial_biologic: f64,
    /// Probability of starting on methotrexate.
    pub initial_mtx: f64,
}

impl Default for TreatmentPattern {
    fn default() -> Self {
        TreatmentPattern {
            prednisone_threshold: 22.0,
            switch_rate: 0.4,
            initial_biologic: 0.2,
            initial_mtx: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    /// Expected visits per patient, at least 2.
    pub mean_visits: f64,
    /// Median days between consecutive visits.
    pub visit_gap_median: f64,
    /// 0 makes the label independent of the record; 1 makes it a noisy
    /// function of it.
    pub signal_strength: f64,
    pub seed: u64,
    /// Target share of `Uncontrolled`.
    pub prevalence_target: f64,
    /// CDAI above this is `Uncontrolled`.
    pub uncontrolled_cdai: f64,
    /// Extra continuous variables `noise_1..` drawn i.i.d. N(0, 1) at every
    /// visit, unrelated to anything else.
    pub noise_variables: usize,
    /// Weight of the refractory burden (share of recent 100-day bins with
    /// uncontrolled CDAI despite biologic or prednisone) in the forecast.
    /// 0 leaves the index-window CDAI and treatment as the only drivers.
    pub refractory_effect: f64,
    pub treatment: TreatmentPattern,
    /// Prefix for patient ids; a seed-derived tag is appended.
    pub id_prefix: String,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_patients: 578,
            mean_visits: 8.0,
            visit_gap_median: 100.0,
            signal_strength: 0.7,
            seed: 0,
            prevalence_target: 0.4,
            uncontrolled_cdai: 10.0,
            noise_variables: 0,
            refractory_effect: BURDEN_EFFECT,
            treatment: TreatmentPattern::default(),
            id_prefix: "p".into(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.n_patients == 0 {
            return bad("n_patients must be positive".into());
        }
        if !(self.mean_visits >= 2.0 && self.mean_visits.is_finite()) {
            return bad(format!(
                "mean_visits {} must be at least 2",
                self.mean_visits
            ));
        }
        if !(self.visit_gap_median >= 1.0 && self.visit_gap_median.is_finite()) {
            return bad(format!(
                "visit_gap_median {} must be at least 1 day",
                self.visit_gap_median
            ));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return bad(format!(
                "signal_strength {} outside [0, 1]",
                self.signal_strength
            ));
        }
        if !(self.prevalence_target > 0.0 && self.prevalence_target < 1.0) {
            return bad(format!(
                "prevalence_target {} outside (0, 1)",
                self.prevalence_target
            ));
        }
        if !(0.0..CDAI_MAX).contains(&self.uncontrolled_cdai) {
            return bad(format!(
                "uncontrolled_cdai {} outside [0, 76)",
                self.uncontrolled_cdai
            ));
        }
        if !(self.refractory_effect >= 0.0 && self.refractory_effect.is_finite()) {
            return bad(format!(
                "refractory_effect {} must be finite and non-negative",
                self.refractory_effect
            ));
        }
        let t = &self.treatment;
        for (name, p) in [
            ("switch_rate", t.switch_rate),
            ("initial_biologic", t.initial_biologic),
            ("initial_mtx", t.initial_mtx),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if !t.prednisone_threshold.is_finite() {
            return bad("prednisone_threshold must be finite".into());
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let noise: Vec<String> = (1..=self.noise_variables)
            .map(|i| format!("noise_{i}"))
            .collect();
        Schema::new(
            CONTINUOUS
                .iter()
                .map(|n| (n.to_string(), VariableKind::Continuous))
                .chain(BINARY.iter().map(|n| (n.to_string(), VariableKind::Binary)))
                .chain(noise.into_iter().map(|n| (n, VariableKind::Continuous))),
        )
        .expect("generator schema is valid")
    }
}

struct Simulated {
    visits: Vec<Visit>,
    /// Next-visit activity before the prevalence offset.
    next_activity: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn simulate_patient(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Simulated {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let gap_dist = LogNormal::new(cfg.visit_gap_median.ln(), 0.5).unwrap();
    let t = &cfg.treatment;
    let cut = cfg.uncontrolled_cdai;

    let severity: f64 = std_normal.sample(rng);
    let baseline = 14.0 + 8.0 * severity;
    let extra = cfg.mean_visits - 2.0;
    let n_visits = 2 + if extra > 0.0 {
        Poisson::new(extra).unwrap().sample(rng) as usize
    } else {
        0
    };

    // mtx, hcq, ssz, lef, biologic
    let mut meds = [
        rng.random_bool(t.initial_mtx),
        rng.random_bool(0.3),
        rng.random_bool(0.15),
        rng.random_bool(0.1),
        rng.random_bool(t.initial_biologic),
    ];
    let mut activity = baseline + 5.0 * std_normal.sample(rng);
    let mut day = 0u32;
    let mut switched = false;
    let mut visits = Vec::with_capacity(n_visits);
    let mut history: Vec<(u32, bool)> = Vec::with_capacity(n_visits);
    let mut last_pred = false;

    for k in 0..n_visits {
        if k > 0 {
            let gap: f64 = gap_dist.sample(rng);
            day += gap.round().max(1.0) as u32;
        }
        let cdai = activity.clamp(0.0, CDAI_MAX);
        let pred = rng.random_bool(sigmoid((cdai - t.prednisone_threshold) / 4.0));
        let esr = (8.0 + 0.9 * cdai + 6.0 * std_normal.sample(rng)).max(0.0);
        let crp = (0.15 * cdai + 0.5) * (0.4 * std_normal.sample(rng)).exp();

        let mut v = Visit::new(day);
        if rng.random_bool(0.9) {
            v = v.with("cdai", round2(cdai));
        }
        if rng.random_bool(0.7) {
            v = v.with("esr", round2(esr));
        }
        if rng.random_bool(0.7) {
            v = v.with("crp", round2(crp));
        }
        v = v.with("prednisone", pred as u8 as f64);
        for (name, &on) in BINARY[1..6].iter().zip(&meds) {
            v = v.with(name, on as u8 as f64);
        }
        v = v.with("dmard_switch", switched as u8 as f64);
        for i in 1..=cfg.noise_variables {
            v = v.with(&format!("noise_{i}"), round2(std_normal.sample(rng)));
        }
        visits.push(v);
        history.push((day, cdai > cut && (meds[4] || pred)));
        last_pred = pred;

        if k + 1 < n_visits {
            activity =
                step_activity(baseline, activity, &meds, pred) + 5.0 * std_normal.sample(rng);
            switched = cdai > cut && rng.random_bool(t.switch_rate);
            if switched {
                escalate(&mut meds);
            }
        }
    }

    let index_day = day;
    // Most recent visit in each of the BURDEN_BINS 100-day bins before the
    // index visit; an empty bin counts as not refractory.
    let mut bins = [None; BURDEN_BINS];
    for &(d, refractory) in &history {
        let back = ((index_day - d) / BURDEN_BIN_DAYS) as usize;
        if back < BURDEN_BINS {
            bins[back] = Some(refractory);
        }
    }
    let burden = bins.iter().filter(|b| **b == Some(true)).count() as f64 / BURDEN_BINS as f64;
    let forecast =
        step_activity(baseline, activity, &meds, last_pred) + cfg.refractory_effect * burden;
    let unrelated = 14.0 + 9.0 * std_normal.sample(rng);
    let s = cfg.signal_strength;
    let next_activity = s * forecast + (1.0 - s) * unrelated + 3.0 * std_normal.sample(rng);
    Simulated {
        visits,
        next_activity,
    }
}

fn step_activity(baseline: f64, activity: f64, meds: &[bool; 5], prednisone: bool) -> f64 {
    let n_dmards = meds.iter().filter(|&&m| m).count() as f64;
    baseline + RHO * (activity - baseline)
        - DMARD_EFFECT * (n_dmards - 1.0)
        - PREDNISONE_EFFECT * prednisone as u8 as f64
}

fn escalate(meds: &mut [bool; 5]) {
    if !meds[0] {
        meds[0] = true;
    } else if !meds[4] {
        meds[4] = true;
    } else if let Some(m) = meds[1..4].iter_mut().find(|m| !**m) {
        *m = true;
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Offset that puts a pilot cohort's prevalence at the target. The pilot
/// depends on the configuration but not its seed, so every seed shares one
/// calibration.
fn calibrate_offset(cfg: &GeneratorConfig) -> f64 {
    let mut next: Vec<f64> = (0..PILOT_PATIENTS)
        .map(|i| {
            let mut rng = substream(PILOT_SEED, &[STREAM_PATIENT, i as u64]);
            simulate_patient(cfg, &mut rng).next_activity
        })
        .collect();
    next.sort_by(f64::total_cmp);
    // Uncontrolled iff next + offset > cut; want a share `p` above.
    let k = ((1.0 - cfg.prevalence_target) * PILOT_PATIENTS as f64).round() as usize;
    let k = k.clamp(1, PILOT_PATIENTS - 1);
    let q = 0.5 * (next[k - 1] + next[k]);
    cfg.uncontrolled_cdai - q
}

pub fn generate_cohort(cfg: &GeneratorConfig) -> Result<Cohort> {
    cfg.validate()?;
    let offset = calibrate_offset(cfg);
    let tag = derive_seed(cfg.seed, &[STREAM_IDS]) & 0xff_ffff;
    let patients = (0..cfg.n_patients)
        .map(|i| {
            let mut rng = substream(cfg.seed, &[STREAM_PATIENT, i as u64]);
            let sim = simulate_patient(cfg, &mut rng);
            let outcome = if sim.next_activity + offset > cfg.uncontrolled_cdai {
                Outcome::Uncontrolled
            } else {
                Outcome::Controlled
            };
            Patient::new(
                format!("{}{tag:06x}-{i:05}", cfg.id_prefix),
                sim.visits,
                outcome,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Cohort::new(cfg.schema(), patients)
}

/// A university-clinic-like cohort and a safety-net-like cohort with lower
/// prevalence and different treatment habits (more prednisone, fewer
/// biologics, slower escalation). Both share one schema.
pub fn make_benchmark_pair(seed: u64) -> Result<(Cohort, Cohort)> {
    let a = GeneratorConfig {
        seed,
        prevalence_target: 0.45,
        id_prefix: "uc".into(),
        ..GeneratorConfig::default()
    };
    let b = GeneratorConfig {
        n_patients: 242,
        seed: derive_seed(seed, &[7]),
        prevalence_target: 0.25,
        id_prefix: "sn".into(),
        treatment: TreatmentPattern {
            prednisone_threshold: 14.0,
            switch_rate: 0.2,
            initial_biologic: 0.05,
            initial_mtx: 0.5,
        },
        ..GeneratorConfig::default()
    };
    Ok((generate_cohort(&a)?, generate_cohort(&b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_patients: 200,
            seed,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn same_seed_same_cohort() {
        assert_eq!(
            generate_cohort(&small(3)).unwrap(),
            generate_cohort(&small(3)).unwrap()
        );
        assert_ne!(
            generate_cohort(&small(3)).unwrap(),
            generate_cohort(&small(4)).unwrap()
        );
    }

    #[test]
    fn values_respect_kinds_and_ranges() {
        let c = generate_cohort(&GeneratorConfig {
            noise_variables: 2,
            ..small(1)
        })
        .unwrap();
        assert_eq!(c.schema.len(), 12);
        for p in &c.patients {
            assert!(p.visits().len() >= 2);
            for v in p.visits() {
                for (name, &x) in &v.observations {
                    match name.as_str() {
                        "cdai" => assert!((0.0..=76.0).contains(&x)),
                        "esr" | "crp" => assert!(x >= 0.0),
                        _ => {}
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            GeneratorConfig {
                n_patients: 0,
                ..small(0)
            },
            GeneratorConfig {
                mean_visits: 1.5,
                ..small(0)
            },
            GeneratorConfig {
                signal_strength: 1.5,
                ..small(0)
            },
            GeneratorConfig {
                prevalence_target: 1.0,
                ..small(0)
            },
            GeneratorConfig {
                refractory_effect: -1.0,
                ..small(0)
            },
        ] {
            assert!(generate_cohort(&cfg).is_err());
        }
    }

    #[test]
    fn ids_depend_on_seed() {
        let a = generate_cohort(&small(1)).unwrap();
        let b = generate_cohort(&small(2)).unwrap();
        assert_ne!(a.patients[0].id(), b.patients[0].id());
    }

    #[test]
    fn escalation_order() {
        let mut m = [false, true, false, false, false];
        escalate(&mut m);
        assert_eq!(m, [true, true, false, false, false]);
        escalate(&mut m);
        assert_eq!(m, [true, true, false, false, true]);
        escalate(&mut m);
        assert_eq!(m, [true, true, true, false, true]);
    }
}
