//! Plain SVG renderers. Output depends only on the data (no timestamps),
//! so reruns are byte-identical.

use std::fmt::Write;

use super::{EmbeddingPlot, ImportanceHeatmap};

const CONTROLLED: &str = "#2c7bb6";
const UNCONTROLLED: &str = "#d7191c";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Blue for negative, white at 0, red for positive; `t` in [-1, 1].
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let s = -t;
        (
            255.0 * (1.0 - s) + 33.0 * s,
            255.0 * (1.0 - s) + 102.0 * s,
            255.0 * (1.0 - s) + 172.0 * s,
        )
    } else {
        (
            255.0 * (1.0 - t) + 178.0 * t,
            255.0 * (1.0 - t) + 24.0 * t,
            255.0 * (1.0 - t) + 43.0 * t,
        )
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}

/// Variables down, windows across (oldest left). The colour scale is
/// symmetric around 0 with limit max |cell|.
pub fn heatmap_svg(h: &ImportanceHeatmap) -> String {
    let (cell_w, cell_h, left, top) = (90.0, 26.0, 130.0, 60.0);
    let width = left + cell_w * h.n_windows as f64 + 30.0;
    let height = top + cell_h * h.variables.len() as f64 + 40.0;
    let limit = h
        .cells
        .iter()
        .map(|c| c.relative_difference.abs())
        .fold(0.0, f64::max);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">Relative difference in auROC (baseline {:.3}, {} rounds)</text>"#,
        width / 2.0,
        h.baseline_auroc,
        h.rounds
    )
    .unwrap();
    for w in 0..h.n_windows {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">window {w}</text>"#,
            left + cell_w * (w as f64 + 0.5),
            top - 8.0
        )
        .unwrap();
    }
    for (v, name) in h.variables.iter().enumerate() {
        let y = top + cell_h * v as f64;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + cell_h * 0.65,
            escape(name)
        )
        .unwrap();
        for w in 0..h.n_windows {
            let value = h.cell(v, w).relative_difference;
            let t = if limit > 0.0 { value / limit } else { 0.0 };
            let x = left + cell_w * w as f64;
            writeln!(
                s,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{cell_w}" height="{cell_h}" fill="{}" stroke="#ffffff"/><text x="{:.1}" y="{:.1}" text-anchor="middle">{value:.4}</text>"##,
                diverging(t),
                x + cell_w / 2.0,
                y + cell_h * 0.65
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One panel per plot, side by side, with a shared outcome legend.
pub fn scatter_svg(plots: &[EmbeddingPlot]) -> String {
    let (panel, pad, legend) = (400.0, 30.0, 40.0);
    let width = pad + plots.len() as f64 * (panel + pad);
    let height = pad * 2.0 + panel + legend;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#).unwrap();
    for (k, plot) in plots.iter().enumerate() {
        let x0 = pad + k as f64 * (panel + pad);
        let y0 = pad * 1.5;
        writeln!(
            s,
            r##"<g class="panel"><rect x="{x0:.1}" y="{y0:.1}" width="{panel}" height="{panel}" fill="none" stroke="#999999"/><text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{} (n={})</text>"##,
            x0 + panel / 2.0,
            y0 - 10.0,
            escape(&plot.cohort_tag),
            plot.points.len()
        )
        .unwrap();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &plot.points {
            for (d, v) in [p.x, p.y].into_iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
        let scale = |v: f64, d: usize| {
            let span = hi[d] - lo[d];
            if span > 0.0 {
                (v - lo[d]) / span
            } else {
                0.5
            }
        };
        for p in &plot.points {
            let cx = x0 + 10.0 + (panel - 20.0) * scale(p.x, 0);
            let cy = y0 + panel - 10.0 - (panel - 20.0) * scale(p.y, 1);
            let fill = if p.outcome == 1 {
                UNCONTROLLED
            } else {
                CONTROLLED
            };
            writeln!(
                s,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{fill}" fill-opacity="0.75"/>"#
            )
            .unwrap();
        }
        s.push_str("</g>\n");
    }
    let ly = height - legend / 2.0;
    writeln!(
        s,
        r#"<g class="legend"><circle cx="{:.1}" cy="{ly:.1}" r="5" fill="{CONTROLLED}"/><text x="{:.1}" y="{:.1}">Controlled</text><circle cx="{:.1}" cy="{ly:.1}" r="5" fill="{UNCONTROLLED}"/><text x="{:.1}" y="{:.1}">Uncontrolled</text></g>"#,
        width / 2.0 - 110.0,
        width / 2.0 - 100.0,
        ly + 4.0,
        width / 2.0 + 10.0,
        width / 2.0 + 20.0,
        ly + 4.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diverging_scale_is_white_at_zero() {
        assert_eq!(diverging(0.0), "#ffffff");
        assert_ne!(diverging(-1.0), diverging(1.0));
    }
}
