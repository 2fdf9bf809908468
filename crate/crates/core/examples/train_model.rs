//! Train each of the six architectures once with default hyperparameters
//! and report validation loss and test auROC.

use timeagg::arch::{self, ArchitectureKind, HyperParams, Preprocessing, TrainConfig};
use timeagg::cohort::{
    prepare_grids, raw_grids, stratified_split, StandardizationStats, WindowConfig,
};
use timeagg::metrics::{auroc, ScoredSet};
use timeagg::synthgen::{generate_cohort, GeneratorConfig};

fn main() -> timeagg::Result<()> {
    let cohort = generate_cohort(&GeneratorConfig::default())?;
    let parts = stratified_split(&cohort, &[0.638, 0.161, 0.201], 0)?;
    let window = WindowConfig::default();
    let stats = StandardizationStats::fit(&raw_grids(&parts[0], window), &cohort.schema);
    let grids: Vec<_> = parts
        .iter()
        .map(|p| prepare_grids(p, window, &stats))
        .collect::<Result<_, _>>()?;
    let pre = Preprocessing {
        schema: cohort.schema.clone(),
        stats,
        window,
    };

    let cfg = TrainConfig::default();
    for kind in ArchitectureKind::ALL {
        let model = arch::train(
            kind,
            &HyperParams::default(),
            &grids[0],
            &grids[1],
            &cfg,
            &pre,
        )?;
        let p = arch::predict(&model, &grids[2])?;
        let y = grids[2].iter().map(|g| g.outcome).collect();
        println!(
            "{:<15} best epoch {:>3}  val loss {:.4}  test auROC {:.3}",
            kind.label(),
            model.best_epoch,
            model.best_val_loss(),
            auroc(&ScoredSet::new(p, y)?)?
        );
    }
    Ok(())
}
