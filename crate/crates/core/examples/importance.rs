//! Longitudinal permutation importance for a TDD-GRU, written as CSV and
//! SVG heatmap.

use timeagg::arch::{self, ArchitectureKind, HyperParams, Preprocessing, TrainConfig};
use timeagg::cohort::{
    prepare_grids, raw_grids, stratified_split, StandardizationStats, WindowConfig,
};
use timeagg::interpret::{permutation_importance, write_importance};
use timeagg::synthgen::{generate_cohort, GeneratorConfig};

fn main() -> timeagg::Result<()> {
    let cohort = generate_cohort(&GeneratorConfig {
        noise_variables: 1,
        ..GeneratorConfig::default()
    })?;
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
    let model = arch::train(
        ArchitectureKind::TddGru,
        &HyperParams::default(),
        &grids[0],
        &grids[1],
        &TrainConfig::default(),
        &pre,
    )?;

    let h = permutation_importance(&model, &grids[2], &grids[0], 20, 0)?;
    println!("baseline auROC {:.3}", h.baseline_auroc);
    println!(
        "{:>12} {}",
        "",
        (0..h.n_windows)
            .map(|w| format!("{:>9}", format!("w{w}")))
            .collect::<String>()
    );
    for (v, name) in h.variables.iter().enumerate() {
        let row: String = (0..h.n_windows)
            .map(|w| format!("{:>9.4}", h.cell(v, w).relative_difference))
            .collect();
        println!("{name:>12} {row}");
    }
    let top = h.most_negative();
    println!("most important: {} in window {}", top.variable, top.window);

    let dir = std::env::temp_dir();
    write_importance(dir.join("importance.csv"), dir.join("importance.svg"), &h)?;
    println!(
        "heatmap written to {}",
        dir.join("importance.svg").display()
    );
    Ok(())
}
