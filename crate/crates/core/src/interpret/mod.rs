//! Interpretation: longitudinal permutation importance and t-SNE
//! "confusion plots" of the final dense representation.

mod importance;
mod svg;
mod tsne;

pub use importance::{permutation_importance, ImportanceCell, ImportanceHeatmap, PoolSource};
pub use svg::{heatmap_svg, scatter_svg};
pub use tsne::{joint_probabilities, tsne, TsneConfig, TsneResult, P_FLOOR};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::{extract_representation, TrainedModel};
use crate::cohort::WindowGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub patient_id: String,
    pub x: f64,
    pub y: f64,
    /// 1 = Uncontrolled.
    pub outcome: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPlot {
    pub cohort_tag: String,
    pub points: Vec<EmbeddingPoint>,
}

/// t-SNE of the model's last hidden layer for every grid, tagged with the
/// patients' outcomes.
pub fn confusion_plot(
    model: &TrainedModel,
    grids: &[WindowGrid],
    cohort_tag: &str,
    cfg: &TsneConfig,
) -> Result<EmbeddingPlot> {
    let rep = extract_representation(model, grids)?;
    let width = rep.shape()[1];
    let rows: Vec<Vec<f64>> = rep.data().chunks(width).map(|r| r.to_vec()).collect();
    let out = tsne(&rows, cfg)?;
    Ok(EmbeddingPlot {
        cohort_tag: cohort_tag.to_string(),
        points: grids
            .iter()
            .zip(out.embedding)
            .map(|(g, [x, y])| EmbeddingPoint {
                patient_id: g.patient_id.clone(),
                x,
                y,
                outcome: g.outcome,
            })
            .collect(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A `#` metadata line with the baseline auROC, then one row per
/// (variable, window) including each round's auROC.
pub fn importance_csv(h: &ImportanceHeatmap) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "# baseline_auroc={},rounds={}",
        h.baseline_auroc, h.rounds
    )
    .unwrap();
    let rounds: Vec<String> = (1..=h.rounds).map(|r| format!("round_{r}")).collect();
    writeln!(
        s,
        "variable,window,relative_difference,mean_permuted_auroc,pool,{}",
        rounds.join(",")
    )
    .unwrap();
    for c in &h.cells {
        let per_round: Vec<String> = c.round_aurocs.iter().map(|a| a.to_string()).collect();
        let pool = serde_json::to_value(c.pool).unwrap();
        writeln!(
            s,
            "{},{},{},{},{},{}",
            c.variable,
            c.window,
            c.relative_difference,
            c.mean_permuted_auroc,
            pool.as_str().unwrap(),
            per_round.join(",")
        )
        .unwrap();
    }
    s
}

pub fn write_importance(
    csv: impl AsRef<Path>,
    svg: impl AsRef<Path>,
    h: &ImportanceHeatmap,
) -> Result<()> {
    write(csv.as_ref(), &importance_csv(h))?;
    write(svg.as_ref(), &heatmap_svg(h))
}

/// Rows sorted by cohort tag, then patient id.
pub fn embedding_csv(plots: &[EmbeddingPlot]) -> String {
    let mut rows: Vec<(&str, &EmbeddingPoint)> = plots
        .iter()
        .flat_map(|p| p.points.iter().map(move |pt| (p.cohort_tag.as_str(), pt)))
        .collect();
    rows.sort_by(|a, b| {
        a.0.cmp(b.0)
            .then_with(|| a.1.patient_id.cmp(&b.1.patient_id))
    });
    let mut s = String::from("patient_id,x,y,outcome,cohort_tag\n");
    for (tag, p) in rows {
        let outcome = if p.outcome == 1 {
            "uncontrolled"
        } else {
            "controlled"
        };
        writeln!(s, "{},{},{},{outcome},{tag}", p.patient_id, p.x, p.y).unwrap();
    }
    s
}

pub fn write_embedding(
    csv: impl AsRef<Path>,
    svg: impl AsRef<Path>,
    plots: &[EmbeddingPlot],
) -> Result<()> {
    write(csv.as_ref(), &embedding_csv(plots))?;
    write(svg.as_ref(), &scatter_svg(plots))
}
