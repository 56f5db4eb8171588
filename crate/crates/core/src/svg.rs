//! U-matrix heatmaps as standalone SVG documents.

use std::fmt::Write;

use crate::error::Result;
use crate::som::Codebook;
use crate::topology::Topology;

/// Mean Euclidean distance from each prototype to the prototypes of its
/// adjacent neurons. Isolated neurons (K = 1) get 0.
pub fn u_matrix(codebook: &Codebook) -> Result<Vec<f64>> {
    let grid = codebook.grid();
    (0..codebook.len())
        .map(|k| {
            let nb = grid.neighbors(k)?;
            if nb.is_empty() {
                return Ok(0.0);
            }
            let wk = codebook.prototype(k);
            let sum: f64 = nb
                .iter()
                .map(|&l| {
                    wk.iter()
                        .zip(codebook.prototype(l))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum();
            Ok(sum / nb.len() as f64)
        })
        .collect()
}

/// Number of rows won by each neuron.
pub fn hit_counts(winners: &[usize], size: usize) -> Vec<usize> {
    let mut hits = vec![0; size];
    for &w in winners {
        if w < size {
            hits[w] += 1;
        }
    }
    hits
}

// light for small distances, dark for large ones
fn shade(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

const SCALE: f64 = 40.0;
const MARGIN: f64 = 30.0;

/// Renders the U-matrix with optional per-neuron hit counts printed in each
/// cell. Cells are hexagons or squares following the grid topology.
pub fn render_u_matrix(codebook: &Codebook, hits: Option<&[usize]>) -> Result<String> {
    let grid = codebook.grid();
    let u = u_matrix(codebook)?;
    let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let hex = grid.topology() == Topology::Hexagonal;
    let (cell_w, cell_h) = if hex { (1.0, 2.0 / 3f64.sqrt()) } else { (1.0, 1.0) };
    let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
    for k in 0..grid.len() {
        let c = grid.coord(k)?;
        max_x = max_x.max(c.x);
        max_y = max_y.max(c.y);
    }
    let width = (max_x + cell_w) * SCALE + 2.0 * MARGIN;
    let height = (max_y + cell_h) * SCALE + 2.0 * MARGIN + 20.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let ox = MARGIN + 0.5 * cell_w * SCALE;
    let oy = MARGIN + 0.5 * cell_h * SCALE;
    for k in 0..grid.len() {
        let c = grid.coord(k)?;
        let (cx, cy) = (ox + c.x * SCALE, oy + c.y * SCALE);
        let fill = shade((u[k] - lo) / span);
        if hex {
            let r = SCALE / 3f64.sqrt();
            let pts: Vec<String> = (0..6)
                .map(|i| {
                    let a = std::f64::consts::PI / 3.0 * i as f64 + std::f64::consts::PI / 6.0;
                    format!("{:.2},{:.2}", cx + r * a.cos(), cy + r * a.sin())
                })
                .collect();
            let _ = writeln!(
                out,
                r##"<polygon points="{}" fill="{fill}" stroke="#999" stroke-width="0.5"><title>neuron {k}: {:.4}</title></polygon>"##,
                pts.join(" "),
                u[k]
            );
        } else {
            let h = SCALE / 2.0;
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="{SCALE}" height="{SCALE}" fill="{fill}" stroke="#999" stroke-width="0.5"><title>neuron {k}: {:.4}</title></rect>"##,
                cx - h,
                cy - h,
                u[k]
            );
        }
        if let Some(&count) = hits.and_then(|h| h.get(k)) {
            if count > 0 {
                let ink = if (u[k] - lo) / span > 0.5 { "white" } else { "black" };
                let _ = writeln!(
                    out,
                    r#"<text x="{cx:.2}" y="{:.2}" font-size="11" font-family="sans-serif" text-anchor="middle" fill="{ink}">{count}</text>"#,
                    cy + 4.0
                );
            }
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.0}" font-size="12" font-family="sans-serif">U-matrix, {}x{} {}, mean neighbor distance {lo:.3} to {hi:.3}</text>"#,
        height - 10.0,
        grid.rows(),
        grid.cols(),
        grid.topology()
    );
    out.push_str("</svg>\n");
    Ok(out)
}
