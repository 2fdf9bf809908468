//! End-to-end measurements shared by the topical tests and the acceptance
//! report. Each returns the numbers a criterion is judged on.

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::oracles::{bootstrap_ci, brute_force_auroc, kmeans, purity};
use timeagg::arch::{self, ArchitectureKind, Dataset, Preprocessing, TrainConfig, TrainedModel};
use timeagg::cohort::{
    prepare_grids, raw_grids, stratified_split, StandardizationStats, WindowConfig, WindowGrid,
};
use timeagg::interpret::{joint_probabilities, permutation_importance, tsne, TsneConfig};
use timeagg::metrics::{auroc, delong_ci, ScoredSet};
use timeagg::synthgen::{generate_cohort, GeneratorConfig};
use timeagg::tuner::{run_study, run_training_study, SearchSpace, TpeConfig};

pub const UC_SPLIT: [f64; 3] = [0.638, 0.161, 0.201];

/// Random score sets with heavy ties: scores are small integers scaled.
pub fn random_scored_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(2..=200);
    let levels = rng.random_range(1..=20);
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let scores = (0..n)
        .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
        .collect();
    (scores, labels)
}

/// Number of mismatches between the sorted auROC and pair counting.
pub fn auroc_mismatches(instances: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .filter(|_| {
            let (s, l) = random_scored_set(&mut rng);
            let fast = auroc(&ScoredSet::new(s.clone(), l.clone()).unwrap()).unwrap();
            fast != brute_force_auroc(&s, &l)
        })
        .count()
}

pub struct DelongCheck {
    /// Largest |DeLong endpoint - bootstrap endpoint| over all sets.
    pub max_endpoint_gap: f64,
    pub perfect_variance: f64,
    pub perfect_ci: (f64, f64),
}

/// DeLong vs a stratified percentile bootstrap on Gaussian class-conditional
/// scores, plus the perfectly separated case.
pub fn delong_vs_bootstrap(
    sets: usize,
    per_class: usize,
    resamples: usize,
    seed: u64,
) -> DelongCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..sets {
        let shift = 0.3 + 1.5 * k as f64 / sets as f64;
        let pos = Normal::new(shift, 1.0).unwrap();
        let neg = Normal::new(0.0, 1.0).unwrap();
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..per_class {
            scores.push(pos.sample(&mut rng));
            labels.push(1);
            scores.push(neg.sample(&mut rng));
            labels.push(0);
        }
        let ci = delong_ci(
            &ScoredSet::new(scores.clone(), labels.clone()).unwrap(),
            0.05,
        )
        .unwrap();
        let (lo, hi) = bootstrap_ci(&scores, &labels, resamples, 0.05, seed ^ k as u64);
        worst = worst.max((ci.lo - lo).abs()).max((ci.hi - hi).abs());
    }
    let scores: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
    let perfect = delong_ci(&ScoredSet::new(scores, labels).unwrap(), 0.05).unwrap();
    DelongCheck {
        max_endpoint_gap: worst,
        perfect_variance: perfect.variance,
        perfect_ci: (perfect.lo, perfect.hi),
    }
}

/// Three isotropic 8-D clusters with centers `separation` apart along
/// distinct axes (unit variance), `per_cluster` points each.
pub fn gaussian_clusters(
    per_cluster: usize,
    separation: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::new();
    let mut truth = Vec::new();
    for c in 0..3 {
        for _ in 0..per_cluster {
            let mut p: Vec<f64> = (0..8).map(|_| noise.sample(&mut rng)).collect();
            p[c] += separation;
            x.push(p);
            truth.push(c);
        }
    }
    (x, truth)
}

pub struct TsneCheck {
    pub purity: f64,
    pub max_asymmetry: f64,
    pub sum_error: f64,
    pub min_off_diagonal: f64,
}

pub fn tsne_clusters(seed: u64) -> TsneCheck {
    // centers 10 apart along distinct axes are 10*sqrt(2) apart pairwise;
    // scale so the pairwise separation is 10 sigma
    let (x, truth) = gaussian_clusters(50, 10.0 / 2f64.sqrt(), seed);
    let cfg = TsneConfig {
        seed,
        ..TsneConfig::default()
    };
    let p = joint_probabilities(&x, cfg.perplexity).unwrap();
    let n = x.len();
    let mut asym: f64 = 0.0;
    let mut min_off = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((p[i * n + j] - p[j * n + i]).abs());
            if i != j {
                min_off = min_off.min(p[i * n + j]);
            }
        }
    }
    let out = tsne(&x, &cfg).unwrap();
    let clusters = kmeans(&out.embedding, 3, seed);
    TsneCheck {
        purity: purity(&clusters, &truth),
        max_asymmetry: asym,
        sum_error: (p.iter().sum::<f64>() - 1.0).abs(),
        min_off_diagonal: min_off,
    }
}

fn dropout_objective(hp: &timeagg::arch::HyperParams) -> f64 {
    (hp.dropout - 0.3).powi(2)
}

/// Best objective of a TPE study on the stubbed trainer.
pub fn tpe_best(trials: usize, seed: u64) -> f64 {
    let space = SearchSpace::for_kind(ArchitectureKind::Dense);
    let mut f = |hp: &timeagg::arch::HyperParams, _: u64| Ok(dropout_objective(hp));
    let study = run_study(&space, trials, seed, &TpeConfig::default(), &mut f).unwrap();
    study.best_trial().objective
}

/// Best objective of uniform random search on the stubbed trainer.
pub fn random_best(trials: usize, seed: u64) -> f64 {
    let space = SearchSpace::for_kind(ArchitectureKind::Dense);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| dropout_objective(&space.sample_uniform(&mut rng)))
        .fold(f64::INFINITY, f64::min)
}

pub struct TpeCheck {
    pub wins: usize,
    pub repeats: usize,
}

/// Repeat `r`: TPE best (seed r) against the median best of `baselines`
/// independent random searches.
pub fn tpe_vs_random(repeats: usize, trials: usize, baselines: usize) -> TpeCheck {
    let wins = (0..repeats as u64)
        .filter(|&r| {
            let tpe = tpe_best(trials, r);
            let mut rs: Vec<f64> = (0..baselines as u64)
                .map(|b| random_best(trials, 1_000 + r * 100 + b))
                .collect();
            rs.sort_by(f64::total_cmp);
            tpe < rs[rs.len() / 2]
        })
        .count();
    TpeCheck { wins, repeats }
}

/// Train/val/test grids for one synthetic cohort, standardized on train.
pub struct Prepared {
    pub train: Vec<WindowGrid>,
    pub val: Vec<WindowGrid>,
    pub test: Vec<WindowGrid>,
    pub preprocessing: Preprocessing,
}

pub fn prepare(cfg: &GeneratorConfig, fractions: &[f64]) -> Prepared {
    let cohort = generate_cohort(cfg).unwrap();
    let parts = stratified_split(&cohort, fractions, cfg.seed).unwrap();
    let window = WindowConfig::default();
    let stats = StandardizationStats::fit(&raw_grids(&parts[0], window), &cohort.schema);
    let grids = |i: usize| prepare_grids(&parts[i], window, &stats).unwrap();
    Prepared {
        train: grids(0),
        val: grids(1),
        test: grids(2),
        preprocessing: Preprocessing {
            schema: cohort.schema.clone(),
            stats,
            window,
        },
    }
}

fn test_auroc(model: &TrainedModel, grids: &[WindowGrid]) -> f64 {
    let p = arch::predict(model, grids).unwrap();
    let y = grids.iter().map(|g| g.outcome).collect();
    auroc(&ScoredSet::new(p, y).unwrap()).unwrap()
}

/// Tunes `kind` with TPE on train/val, refits the best trial and returns
/// its test auROC.
pub fn tuned_test_auroc(
    data: &Prepared,
    kind: ArchitectureKind,
    trials: usize,
    train_cfg: &TrainConfig,
) -> f64 {
    let train = Dataset::from_grids(&data.train).unwrap();
    let val = Dataset::from_grids(&data.val).unwrap();
    let space = SearchSpace::for_kind(kind);
    let study = run_training_study(
        kind,
        &space,
        trials,
        &train,
        &val,
        train_cfg,
        train_cfg.seed,
    )
    .unwrap();
    let best = study.best_trial();
    let cfg = TrainConfig {
        seed: best.seed,
        ..train_cfg.clone()
    };
    let model = arch::train(
        kind,
        &best.hyperparams,
        &data.train,
        &data.val,
        &cfg,
        &data.preprocessing,
    )
    .unwrap();
    test_auroc(&model, &data.test)
}

pub struct ImportanceCheck {
    /// Per seed: whether (cdai, last window) was the most negative cell.
    pub cdai_last_most_negative: Vec<bool>,
    /// Per seed: mean |relative difference| of the noise variable over its
    /// windows.
    pub noise_mean_abs: Vec<f64>,
}

/// Trains a TDD-GRU on a cohort whose outcome is driven by index-window CDAI
/// (no refractory-burden term), with one pure-noise variable, and scores
/// permutation importance, once per seed.
pub fn importance_scenario(seeds: &[u64], rounds: usize) -> ImportanceCheck {
    let mut check = ImportanceCheck {
        cdai_last_most_negative: Vec::new(),
        noise_mean_abs: Vec::new(),
    };
    for &seed in seeds {
        let gen = GeneratorConfig {
            seed,
            noise_variables: 1,
            signal_strength: 0.9,
            refractory_effect: 0.0,
            ..GeneratorConfig::default()
        };
        let data = prepare(&gen, &UC_SPLIT);
        let kind = ArchitectureKind::TddGru;
        let hp = timeagg::arch::HyperParams::default();
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let model =
            arch::train(kind, &hp, &data.train, &data.val, &cfg, &data.preprocessing).unwrap();
        let h = permutation_importance(&model, &data.test, &data.train, rounds, seed).unwrap();
        let top = h.most_negative();
        check
            .cdai_last_most_negative
            .push(top.variable == "cdai" && top.window == h.n_windows - 1);
        let v = h.variables.iter().position(|n| n == "noise_1").unwrap();
        let mean_abs = (0..h.n_windows)
            .map(|w| h.cell(v, w).relative_difference.abs())
            .sum::<f64>()
            / h.n_windows as f64;
        check.noise_mean_abs.push(mean_abs);
    }
    check
}

pub fn timeagg_bin() -> &'static str {
    env!("CARGO_BIN_EXE_timeagg")
}

/// Runs the binary; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(timeagg_bin()).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// A small but complete config so the full pipeline runs in seconds.
pub const FAST_CONFIG: &str = "seed = 5\nn_patients = 240\ntrials = 3\nmax_epochs = 15\nrounds = 2\ntsne_iterations = 300\nperplexity = 10.0\n";

/// Every command in order, with outputs under `dir`. Returns each
/// command's stdout.
pub fn full_pipeline(dir: &Path, config: &Path) -> Vec<String> {
    let d = dir.to_str().unwrap();
    let c = config.to_str().unwrap();
    let test_split = dir.join("split_test.jsonl");
    let cohort_b = dir.join("cohort_b.jsonl");
    let steps: Vec<Vec<&str>> = vec![
        vec!["synth", "--pair"],
        vec!["synth"],
        vec!["prepare"],
        vec!["tune", "--kind", "tdd_gru"],
        vec!["train", "--kind", "tdd_gru"],
        vec!["tune", "--kind", "dense"],
        vec!["train", "--kind", "dense", "--merge-val"],
        vec!["eval", "--sweep"],
        vec!["eval", "--kind", "tdd_gru", "--split", "val"],
        vec!["importance", "--kind", "tdd_gru"],
        vec!["confusion", "--kind", "dense"],
        vec![
            "confusion",
            "--kind",
            "tdd_gru",
            "--cohort",
            test_split.to_str().unwrap(),
            "--cohort",
            cohort_b.to_str().unwrap(),
        ],
    ];
    let mut logs = Vec::new();
    for step in steps {
        let mut args = vec!["--config", c, "--out", d];
        args.extend(step.iter().copied());
        let (code, stdout, stderr) = run_cli(&args);
        assert_eq!(code, 0, "{step:?} failed: {stderr}");
        logs.push(stdout);
    }
    logs
}

/// Files in `a` whose bytes differ from (or are missing in) `b`.
pub fn differing_files(a: &Path, b: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
        .into_iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .collect()
}
