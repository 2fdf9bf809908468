//! Command-line front end: `timeagg <command> [flags]`.
//!
//! All files live in the output directory (`--out`, default `out/`):
//!
//! | command      | reads                                    | writes                                         |
//! |--------------|------------------------------------------|------------------------------------------------|
//! | `synth`      |                                          | `cohort.jsonl`, `schema.json` (`cohort_b.jsonl` with `--pair`) |
//! | `prepare`    | cohort, schema                           | `split_{train,val,test}.jsonl`, `preprocessing.json`, `grids_*.csv` |
//! | `tune`       | splits, `preprocessing.json`             | `study_<kind>.jsonl`, `best_<kind>.json`       |
//! | `train`      | splits, `best_<kind>.json`               | `model_<kind>.json`                            |
//! | `eval`       | model(s), a split                        | `eval_<split>.csv`                             |
//! | `importance` | model, test and train splits             | `importance_<kind>.csv`, `importance_<kind>.svg` |
//! | `confusion`  | model, one or two cohorts                | `confusion_<kind>.csv`, `confusion_<kind>.svg` |
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod artifact;
mod config;

pub use artifact::{ModelArtifact, FORMAT_VERSION};
pub use config::RunConfig;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::arch::{self, ArchitectureKind, Dataset, HyperParams, Preprocessing, TrainConfig};
use crate::cohort::{
    prepare_grids, raw_grids, read_cohort, read_schema, stratified_split, write_cohort,
    write_grids_csv, write_schema, Cohort, Schema, StandardizationStats, WindowConfig, WindowGrid,
};
use crate::error::{Error, Result};
use crate::interpret::{self, TsneConfig};
use crate::metrics::{delong_ci, ScoredSet};
use crate::rng::derive_seed;
use crate::synthgen::{self, GeneratorConfig};
use crate::tuner::{self, SearchSpace, Trial};

const SPLITS: [&str; 3] = ["train", "val", "test"];
const MERGE_HOLDOUT: f64 = 0.1;
const STREAM_HOLDOUT: u64 = 21;

#[derive(Debug, Parser)]
#[command(
    name = "timeagg",
    version,
    about = "Time-aggregation networks for longitudinal clinical data"
)]
pub struct Cli {
    /// Flat TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort.
    Synth {
        #[arg(long)]
        n_patients: Option<usize>,
        #[arg(long)]
        signal: Option<f64>,
        /// Also write a second, shifted cohort (`cohort_b.jsonl`).
        #[arg(long)]
        pair: bool,
    },
    /// Split a cohort and fit the standardization on the training split.
    Prepare {
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// TPE search on train/validation.
    Tune {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Train one model.
    Train {
        #[arg(long)]
        kind: Option<String>,
        /// Hyperparameters as JSON (a trial record or a bare object);
        /// defaults to `best_<kind>.json`.
        #[arg(long)]
        hyperparams: Option<PathBuf>,
        /// Fit on train+validation, checkpointing on a 10% stratified
        /// holdout drawn from the merged set.
        #[arg(long)]
        merge_val: bool,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// auROC with a DeLong 95% interval.
    Eval {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, conflicts_with = "kind")]
        model: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        /// Evaluate every `model_<kind>.json` in the output directory.
        #[arg(long, conflicts_with_all = ["kind", "model"])]
        sweep: bool,
    },
    /// Longitudinal permutation importance heatmap.
    Importance {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, conflicts_with = "kind")]
        model: Option<PathBuf>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// t-SNE of the last hidden layer for one or two cohorts.
    Confusion {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, conflicts_with = "kind")]
        model: Option<PathBuf>,
        /// Cohort files (JSON-Lines); at most two. Defaults to the test split.
        #[arg(long = "cohort", value_name = "PATH")]
        cohorts: Vec<PathBuf>,
    },
}

/// Maps a library error onto the documented exit codes.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::Shape(_) | Error::Data(_) | Error::Io { .. } | Error::Json(_) => 2,
        Error::NonFiniteLoss { .. } | Error::Numeric(_) => 3,
    }
}

/// Parses `args` (program name first), runs the command, prints any
/// diagnostic as one line on stderr and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            eprintln!("{first} (see --help)");
            return 1;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

/// Runs a parsed command, writing its summary lines to `log`.
pub fn execute(cli: &Cli, log: &mut dyn std::io::Write) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut out = String::new();
    match &cli.command {
        Command::Synth {
            n_patients,
            signal,
            pair,
        } => {
            if let Some(n) = n_patients {
                cfg.n_patients = *n;
            }
            if let Some(s) = signal {
                cfg.signal_strength = *s;
            }
            cmd_synth(&cfg, *pair, &mut out)?
        }
        Command::Prepare { cohort, schema } => {
            if cohort.is_some() {
                cfg.cohort = cohort.clone();
            }
            if schema.is_some() {
                cfg.schema = schema.clone();
            }
            cmd_prepare(&cfg, &mut out)?
        }
        Command::Tune {
            kind,
            trials,
            max_epochs,
        } => {
            if let Some(t) = trials {
                cfg.trials = *t;
            }
            if let Some(m) = max_epochs {
                cfg.max_epochs = *m;
            }
            cmd_tune(&cfg, resolve_kind(&cfg, kind)?, &mut out)?
        }
        Command::Train {
            kind,
            hyperparams,
            merge_val,
            max_epochs,
        } => {
            if let Some(m) = max_epochs {
                cfg.max_epochs = *m;
            }
            cmd_train(
                &cfg,
                resolve_kind(&cfg, kind)?,
                hyperparams.as_deref(),
                *merge_val,
                &mut out,
            )?
        }
        Command::Eval {
            kind,
            model,
            split,
            sweep,
        } => {
            let models = if *sweep {
                let found: Vec<PathBuf> = ArchitectureKind::ALL
                    .iter()
                    .map(|k| model_path(&cfg, *k))
                    .filter(|p| p.exists())
                    .collect();
                if found.is_empty() {
                    return Err(Error::data(format!(
                        "no model_<kind>.json in {}",
                        cfg.out.display()
                    )));
                }
                found
            } else {
                vec![model_arg(&cfg, kind, model)?]
            };
            cmd_eval(&cfg, &models, split, &mut out)?
        }
        Command::Importance {
            kind,
            model,
            rounds,
        } => {
            if let Some(r) = rounds {
                cfg.rounds = *r;
            }
            cmd_importance(&cfg, &model_arg(&cfg, kind, model)?, &mut out)?
        }
        Command::Confusion {
            kind,
            model,
            cohorts,
        } => cmd_confusion(&cfg, &model_arg(&cfg, kind, model)?, cohorts, &mut out)?,
    }
    log.write_all(out.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn resolve_kind(cfg: &RunConfig, flag: &Option<String>) -> Result<ArchitectureKind> {
    match flag.as_ref().or(cfg.kind.as_ref()) {
        Some(k) => k.parse(),
        None => Err(Error::invalid(
            "no architecture given (use --kind or `kind` in the config)",
        )),
    }
}

fn model_path(cfg: &RunConfig, kind: ArchitectureKind) -> PathBuf {
    cfg.out.join(format!("model_{kind}.json"))
}

fn model_arg(cfg: &RunConfig, kind: &Option<String>, model: &Option<PathBuf>) -> Result<PathBuf> {
    match model {
        Some(p) => Ok(p.clone()),
        None => Ok(model_path(cfg, resolve_kind(cfg, kind)?)),
    }
}

fn window_config(cfg: &RunConfig) -> Result<WindowConfig> {
    if cfg.window_len == 0 || cfg.n_windows == 0 {
        return Err(Error::invalid("window_len and n_windows must be positive"));
    }
    Ok(WindowConfig {
        window_len: cfg.window_len,
        n_windows: cfg.n_windows,
    })
}

fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        batch_size: cfg.batch_size,
        max_epochs: cfg.max_epochs,
        seed: cfg.seed,
        shuffle: true,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

fn read_preprocessing(cfg: &RunConfig) -> Result<Preprocessing> {
    read_json(&cfg.out.join("preprocessing.json"))
}

fn read_split(cfg: &RunConfig, schema: &Schema, split: &str) -> Result<Cohort> {
    if !SPLITS.contains(&split) {
        return Err(Error::invalid(format!(
            "unknown split `{split}` (expected train, val or test)"
        )));
    }
    read_cohort(cfg.out.join(format!("split_{split}.jsonl")), schema)
}

fn merge(a: &Cohort, b: &Cohort) -> Result<Cohort> {
    let patients = a.patients.iter().chain(&b.patients).cloned().collect();
    Cohort::new(a.schema.clone(), patients)
}

fn cmd_synth(cfg: &RunConfig, pair: bool, out: &mut String) -> Result<()> {
    let (a, b) = if pair {
        let (a, b) = synthgen::make_benchmark_pair(cfg.seed)?;
        (a, Some(b))
    } else {
        let gen = GeneratorConfig {
            n_patients: cfg.n_patients,
            mean_visits: cfg.mean_visits,
            visit_gap_median: cfg.visit_gap_median,
            signal_strength: cfg.signal_strength,
            seed: cfg.seed,
            prevalence_target: cfg.prevalence_target,
            noise_variables: cfg.noise_variables,
            ..GeneratorConfig::default()
        };
        (synthgen::generate_cohort(&gen)?, None)
    };
    write_cohort(cfg.out.join("cohort.jsonl"), &a)?;
    write_schema(cfg.out.join("schema.json"), &a.schema)?;
    writeln!(
        out,
        "synth: n_patients={} prevalence={:.4}",
        a.len(),
        a.prevalence()
    )
    .unwrap();
    if let Some(b) = b {
        write_cohort(cfg.out.join("cohort_b.jsonl"), &b)?;
        writeln!(
            out,
            "synth: cohort_b n_patients={} prevalence={:.4}",
            b.len(),
            b.prevalence()
        )
        .unwrap();
    }
    Ok(())
}

fn cmd_prepare(cfg: &RunConfig, out: &mut String) -> Result<()> {
    let cohort_path = cfg
        .cohort
        .clone()
        .unwrap_or_else(|| cfg.out.join("cohort.jsonl"));
    let schema_path = cfg
        .schema
        .clone()
        .unwrap_or_else(|| cfg.out.join("schema.json"));
    let schema = read_schema(&schema_path)?;
    let cohort = read_cohort(&cohort_path, &schema)?;
    let window = window_config(cfg)?;
    let splits = stratified_split(&cohort, &cfg.split_fractions, cfg.seed)?;
    if splits.len() != 3 {
        return Err(Error::invalid(
            "split_fractions must have three entries (train, val, test)",
        ));
    }
    let stats = StandardizationStats::fit(&raw_grids(&splits[0], window), &schema);
    let pre = Preprocessing {
        schema: schema.clone(),
        stats,
        window,
    };
    write_json(&cfg.out.join("preprocessing.json"), &pre)?;
    for (name, split) in SPLITS.iter().zip(&splits) {
        write_cohort(cfg.out.join(format!("split_{name}.jsonl")), split)?;
        let grids = prepare_grids(split, window, &pre.stats)?;
        write_grids_csv(cfg.out.join(format!("grids_{name}.csv")), &schema, &grids)?;
        writeln!(
            out,
            "prepare: {name} n={} prevalence={:.4}",
            split.len(),
            split.prevalence()
        )
        .unwrap();
    }
    Ok(())
}

fn prepared(cfg: &RunConfig, pre: &Preprocessing, split: &str) -> Result<Vec<WindowGrid>> {
    let cohort = read_split(cfg, &pre.schema, split)?;
    prepare_grids(&cohort, pre.window, &pre.stats)
}

fn cmd_tune(cfg: &RunConfig, kind: ArchitectureKind, out: &mut String) -> Result<()> {
    let pre = read_preprocessing(cfg)?;
    let train = Dataset::from_grids(&prepared(cfg, &pre, "train")?)?;
    let val = Dataset::from_grids(&prepared(cfg, &pre, "val")?)?;
    let space = SearchSpace::for_kind(kind);
    let study = tuner::run_training_study(
        kind,
        &space,
        cfg.trials,
        &train,
        &val,
        &train_config(cfg),
        cfg.seed,
    )?;
    tuner::write_study_log(cfg.out.join(format!("study_{kind}.jsonl")), &study.trials)?;
    let best = study.best_trial();
    write_json(&cfg.out.join(format!("best_{kind}.json")), best)?;
    let failed = study
        .trials
        .iter()
        .filter(|t| !t.objective.is_finite())
        .count();
    writeln!(
        out,
        "tune: {kind} trials={} failed={failed} best_trial={} val_loss={:.6}",
        study.trials.len(),
        best.index,
        best.objective
    )
    .unwrap();
    Ok(())
}

fn read_hyperparams(path: &Path) -> Result<HyperParams> {
    let value: serde_json::Value = read_json(path)?;
    let hp = if value.get("hyperparams").is_some() {
        serde_json::from_value::<Trial>(value).map(|t| t.hyperparams)
    } else {
        serde_json::from_value::<HyperParams>(value)
    };
    hp.map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

fn cmd_train(
    cfg: &RunConfig,
    kind: ArchitectureKind,
    hyperparams: Option<&Path>,
    merge_val: bool,
    out: &mut String,
) -> Result<()> {
    let hp_path = hyperparams
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out.join(format!("best_{kind}.json")));
    let hp = read_hyperparams(&hp_path)?;
    hp.validate(kind)?;
    let pre = read_preprocessing(cfg)?;
    let train = read_split(cfg, &pre.schema, "train")?;
    let val = read_split(cfg, &pre.schema, "val")?;

    let (pre, fit_set, monitor) = if merge_val {
        let merged = merge(&train, &val)?;
        let stats = StandardizationStats::fit(&raw_grids(&merged, pre.window), &pre.schema);
        let pre = Preprocessing { stats, ..pre };
        let parts = stratified_split(
            &merged,
            &[1.0 - MERGE_HOLDOUT, MERGE_HOLDOUT],
            derive_seed(cfg.seed, &[STREAM_HOLDOUT]),
        )?;
        let holdout = parts.into_iter().nth(1).expect("two parts");
        (pre, merged, holdout)
    } else {
        (pre, train, val)
    };
    let fit_grids = prepare_grids(&fit_set, pre.window, &pre.stats)?;
    let monitor_grids = prepare_grids(&monitor, pre.window, &pre.stats)?;
    let model = arch::train(
        kind,
        &hp,
        &fit_grids,
        &monitor_grids,
        &train_config(cfg),
        &pre,
    )?;
    ModelArtifact::new(model.clone()).save(model_path(cfg, kind))?;
    writeln!(
        out,
        "train: {kind} fit_n={} monitor_n={} epochs={} best_epoch={} val_loss={:.6}",
        fit_grids.len(),
        monitor_grids.len(),
        model.history.len(),
        model.best_epoch,
        model.best_val_loss()
    )
    .unwrap();
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, models: &[PathBuf], split: &str, out: &mut String) -> Result<()> {
    let mut rows = Vec::new();
    for path in models {
        let model = ModelArtifact::load(path)?.model;
        let grids = prepared(cfg, &model.preprocessing, split)?;
        let scores = arch::predict(&model, &grids)?;
        let labels = grids.iter().map(|g| g.outcome).collect();
        let set = ScoredSet::new(scores, labels)?;
        if set.n_pos() == 0 || set.n_neg() == 0 {
            return Err(Error::data(format!("split `{split}` has a single class")));
        }
        rows.push((model.kind(), delong_ci(&set, 0.05)?));
    }
    rows.sort_by(|a, b| b.1.auc.total_cmp(&a.1.auc).then(a.0.cmp(&b.0)));
    let mut csv = String::from("kind,auc,lo,hi\n");
    for (kind, ci) in &rows {
        writeln!(csv, "{kind},{},{},{}", ci.auc, ci.lo, ci.hi).unwrap();
        writeln!(
            out,
            "{:<15} {:.3} [{:.3}, {:.3}]",
            kind.label(),
            ci.auc,
            ci.lo,
            ci.hi
        )
        .unwrap();
    }
    let path = cfg.out.join(format!("eval_{split}.csv"));
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))
}

fn cmd_importance(cfg: &RunConfig, model_file: &Path, out: &mut String) -> Result<()> {
    let model = ModelArtifact::load(model_file)?.model;
    let test = prepared(cfg, &model.preprocessing, "test")?;
    let train = prepared(cfg, &model.preprocessing, "train")?;
    let h = interpret::permutation_importance(&model, &test, &train, cfg.rounds, cfg.seed)?;
    let kind = model.kind();
    interpret::write_importance(
        cfg.out.join(format!("importance_{kind}.csv")),
        cfg.out.join(format!("importance_{kind}.svg")),
        &h,
    )?;
    let top = h.most_negative();
    writeln!(
        out,
        "importance: {kind} baseline_auroc={:.4} most_negative={}@w{} rd={:.4}",
        h.baseline_auroc, top.variable, top.window, top.relative_difference
    )
    .unwrap();
    Ok(())
}

fn cmd_confusion(
    cfg: &RunConfig,
    model_file: &Path,
    cohorts: &[PathBuf],
    out: &mut String,
) -> Result<()> {
    if cohorts.len() > 2 {
        return Err(Error::invalid("at most two cohorts can be compared"));
    }
    let model = ModelArtifact::load(model_file)?.model;
    let pre = &model.preprocessing;
    let inputs: Vec<(String, Cohort)> = if cohorts.is_empty() {
        vec![("test".into(), read_split(cfg, &pre.schema, "test")?)]
    } else {
        cohorts
            .iter()
            .map(|p| {
                let tag = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                read_cohort(p, &pre.schema).map(|c| (tag, c))
            })
            .collect::<Result<_>>()?
    };
    let tsne_cfg = TsneConfig {
        perplexity: cfg.perplexity,
        iterations: cfg.tsne_iterations,
        seed: cfg.seed,
        ..TsneConfig::default()
    };
    let mut plots = Vec::new();
    for (tag, cohort) in &inputs {
        let grids = prepare_grids(cohort, pre.window, &pre.stats)?;
        plots.push(interpret::confusion_plot(&model, &grids, tag, &tsne_cfg)?);
        writeln!(out, "confusion: {tag} n={}", cohort.len()).unwrap();
    }
    let kind = model.kind();
    interpret::write_embedding(
        cfg.out.join(format!("confusion_{kind}.csv")),
        cfg.out.join(format!("confusion_{kind}.svg")),
        &plots,
    )
}
