//! Side-by-side t-SNE "confusion plots" of a model's last hidden layer on
//! two synthetic cohorts with different treatment habits.

use timeagg::arch::{self, ArchitectureKind, HyperParams, Preprocessing, TrainConfig};
use timeagg::cohort::{
    prepare_grids, raw_grids, stratified_split, StandardizationStats, WindowConfig,
};
use timeagg::interpret::{confusion_plot, write_embedding, TsneConfig};
use timeagg::synthgen::make_benchmark_pair;

fn main() -> timeagg::Result<()> {
    let (a, b) = make_benchmark_pair(0)?;
    let parts = stratified_split(&a, &[0.638, 0.161, 0.201], 0)?;
    let window = WindowConfig::default();
    let stats = StandardizationStats::fit(&raw_grids(&parts[0], window), &a.schema);
    let grids: Vec<_> = parts
        .iter()
        .map(|p| prepare_grids(p, window, &stats))
        .collect::<Result<_, _>>()?;
    let pre = Preprocessing {
        schema: a.schema.clone(),
        stats,
        window,
    };
    let model = arch::train(
        ArchitectureKind::TddGru,
        &HyperParams::default(),
        &grids[0],
        &grids[1],
        &TrainConfig::default(),
        &pre,
    )?;

    let cfg = TsneConfig::default();
    let plot_a = confusion_plot(&model, &grids[2], "university", &cfg)?;
    let plot_b = confusion_plot(
        &model,
        &prepare_grids(&b, window, &pre.stats)?,
        "safety-net",
        &cfg,
    )?;
    for p in [&plot_a, &plot_b] {
        let unc = p.points.iter().filter(|q| q.outcome == 1).count();
        println!(
            "{}: {} patients, {} uncontrolled",
            p.cohort_tag,
            p.points.len(),
            unc
        );
    }
    let dir = std::env::temp_dir();
    write_embedding(
        dir.join("confusion.csv"),
        dir.join("confusion.svg"),
        &[plot_a, plot_b],
    )?;
    println!("plot written to {}", dir.join("confusion.svg").display());
    Ok(())
}
