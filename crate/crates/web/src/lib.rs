//! WebAssembly entry points for the static demo page in `www/`.
//!
//! Every export takes and returns plain strings or numbers; structured results
//! are JSON text. The `*_json` functions hold the logic and are usable (and
//! tested) natively.

use missom::bench::{run_method, Algorithm, MethodConfig};
use missom::data::{ampute, gen_gaussian_mixture, AmputationSpec, Mechanism, MixtureSpec};
use missom::io;
use missom::masked::assign;
use missom::metrics::evaluate;
use missom::svg::{hit_counts, render_u_matrix};
use missom::{GridSpec, Topology};
use serde_json::json;
use wasm_bindgen::prelude::*;

type Res<T> = std::result::Result<T, String>;

fn grid(rows: usize, cols: usize, hex: bool) -> Res<GridSpec> {
    let topology = if hex { Topology::Hexagonal } else { Topology::Rectangular };
    GridSpec::new(rows, cols, topology).map_err(|e| e.to_string())
}

/// Generates a mixture, masks it and returns `{csv, truth_csv, column_rates}`.
pub fn ampute_preview_json(n: usize, seed: u64, rate: f64, mechanism: &str) -> Res<String> {
    let mechanism: Mechanism = mechanism.parse().map_err(|e: missom::Error| e.to_string())?;
    let spec = MixtureSpec { n, seed, ..Default::default() };
    let (x, labels) = gen_gaussian_mixture(&spec).map_err(|e| e.to_string())?;
    let (data, truth) = ampute(x.view(), &AmputationSpec { rate, mechanism, seed: seed ^ 0x5eed })
        .map_err(|e| e.to_string())?;
    let header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    let mut csv = Vec::new();
    io::write_data(&mut csv, &header, &data).map_err(|e| e.to_string())?;
    let mut truth_csv = Vec::new();
    io::write_imputations(&mut truth_csv, &truth).map_err(|e| e.to_string())?;
    let rates: Vec<f64> = data
        .mask()
        .columns()
        .into_iter()
        .map(|c| c.iter().filter(|o| !**o).count() as f64 / data.n() as f64)
        .collect();
    Ok(json!({
        "csv": String::from_utf8_lossy(&csv),
        "truth_csv": String::from_utf8_lossy(&truth_csv),
        "labels": labels,
        "column_rates": rates,
    })
    .to_string())
}

/// Trains a map on CSV text (missing entries as `NA` or empty) and returns
/// `{svg, metrics}`. The truth text may be empty.
pub fn train_map_json(
    csv: &str,
    truth_csv: &str,
    algorithm: &str,
    rows: usize,
    cols: usize,
    hex: bool,
    epochs: usize,
    seed: u64,
) -> Res<String> {
    let algorithm: Algorithm = algorithm.parse().map_err(|e: missom::Error| e.to_string())?;
    let table = io::read_data(csv.as_bytes()).map_err(|e| e.to_string())?;
    let truth = if truth_csv.trim().is_empty() {
        None
    } else {
        Some(io::read_imputations(truth_csv.as_bytes()).map_err(|e| e.to_string())?)
    };
    let g = grid(rows, cols, hex)?;
    let mut method = MethodConfig::new(g);
    method.schedule = method.schedule.with_epochs(epochs);
    let out = run_method(algorithm, &table.data, &method, seed).map_err(|e| e.to_string())?;
    let cb = out.codebook.ok_or("method produced no map")?;
    let no_labels: Option<&[usize]> = None;
    let report = evaluate(&table.data, Some(&cb), &out.imputations, truth.as_ref(), no_labels, out.wall_time)
        .map_err(|e| e.to_string())?;
    let hits = hit_counts(&assign(&table.data, &cb).map_err(|e| e.to_string())?, cb.len());
    let svg = render_u_matrix(&cb, Some(&hits)).map_err(|e| e.to_string())?;
    Ok(json!({ "svg": svg, "metrics": report }).to_string())
}

/// Neighborhood weight of every neuron around the central one, as
/// `{distance, weight}` pairs sorted by distance.
pub fn neighborhood_curve_json(rows: usize, cols: usize, hex: bool, radius: f64) -> Res<String> {
    let g = grid(rows, cols, hex)?;
    let centre = (rows / 2) * cols + cols / 2;
    let mut pts = (0..g.len())
        .map(|k| {
            Ok((
                g.map_distance(centre, k)?,
                g.neighborhood_weight(centre, k, radius)?,
            ))
        })
        .collect::<missom::Result<Vec<(f64, f64)>>>()
        .map_err(|e| e.to_string())?;
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9);
    let pts: Vec<_> = pts.iter().map(|(d, w)| json!({ "distance": d, "weight": w })).collect();
    Ok(serde_json::Value::from(pts).to_string())
}

#[wasm_bindgen]
pub fn ampute_preview(n: usize, seed: u32, rate: f64, mechanism: &str) -> Result<String, JsError> {
    ampute_preview_json(n, seed as u64, rate, mechanism).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn train_map(
    csv: &str,
    truth_csv: &str,
    algorithm: &str,
    rows: usize,
    cols: usize,
    hex: bool,
    epochs: usize,
    seed: u32,
) -> Result<String, JsError> {
    train_map_json(csv, truth_csv, algorithm, rows, cols, hex, epochs, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn neighborhood_curve(rows: usize, cols: usize, hex: bool, radius: f64) -> Result<String, JsError> {
    neighborhood_curve_json(rows, cols, hex, radius).map_err(|e| JsError::new(&e))
}
