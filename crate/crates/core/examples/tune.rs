//! TPE search, first on a cheap stand-in objective, then for real on a
//! small synthetic cohort.

use timeagg::arch::{ArchitectureKind, Dataset, HyperParams, TrainConfig};
use timeagg::cohort::{
    prepare_grids, raw_grids, stratified_split, StandardizationStats, WindowConfig,
};
use timeagg::synthgen::{generate_cohort, GeneratorConfig};
use timeagg::tuner::{run_study, run_training_study, SearchSpace, TpeConfig};

fn main() -> timeagg::Result<()> {
    let space = SearchSpace::for_kind(ArchitectureKind::TddGru);
    let mut stub = |hp: &HyperParams, _seed: u64| Ok((hp.dropout - 0.3).powi(2));
    let study = run_study(&space, 50, 1, &TpeConfig::default(), &mut stub)?;
    let best = study.best_trial();
    println!(
        "stub objective: best dropout {:.4} after 50 trials (trial {})",
        best.hyperparams.dropout, best.index
    );

    let cohort = generate_cohort(&GeneratorConfig {
        n_patients: 300,
        ..GeneratorConfig::default()
    })?;
    let parts = stratified_split(&cohort, &[0.6, 0.2, 0.2], 0)?;
    let window = WindowConfig::default();
    let stats = StandardizationStats::fit(&raw_grids(&parts[0], window), &cohort.schema);
    let train = Dataset::from_grids(&prepare_grids(&parts[0], window, &stats)?)?;
    let val = Dataset::from_grids(&prepare_grids(&parts[1], window, &stats)?)?;
    let cfg = TrainConfig {
        max_epochs: 60,
        ..TrainConfig::default()
    };
    let study = run_training_study(ArchitectureKind::TddGru, &space, 12, &train, &val, &cfg, 0)?;
    for t in &study.trials {
        let hp = &t.hyperparams;
        println!(
            "trial {:>2}: units {:>2}/{:>2}/{:>2} l1 {:.1e} l2 {:.1e} dropout {:.2} -> val loss {:.4}",
            t.index, hp.units_input, hp.units_agg, hp.units_dense, hp.l1, hp.l2, hp.dropout, t.objective
        );
    }
    println!("best: trial {}", study.best);
    Ok(())
}
