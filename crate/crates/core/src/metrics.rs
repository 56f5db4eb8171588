//! Map quality and imputation quality measures.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use web_time::Duration;

use crate::cluster::ward_clusters;
use crate::error::{domain, Error, Result};
use crate::masked::{assign, two_nearest, ImputationSet, MaskedDataset};
use crate::som::{check_dim, masked_sq_dist, nearest, Codebook};

/// Metrics for one run. Undefined quantities are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantization: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topographic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imputation_rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    /// ARI after Ward-merging the neurons into as many clusters as there are
    /// distinct labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari_merged: Option<f64>,
    #[serde(rename = "wall_time_s")]
    pub wall_time: f64,
}

/// Mean squared residual between observed entries and the masked winner,
/// normalized by the number of observed entries.
pub fn quantization_error(data: &MaskedDataset, codebook: &Codebook) -> Result<f64> {
    check_dim(data.p(), codebook.dim())?;
    let n_obs = data.observed_count();
    if n_obs == 0 {
        return domain("no observed entries");
    }
    let p = data.p();
    let total: f64 = (0..data.n())
        .map(|i| {
            let (x, m) = (data.row(i), data.mask_row(i));
            let ell = nearest(x, Some(m), codebook.flat(), p);
            masked_sq_dist(x, Some(m), codebook.prototype(ell))
        })
        .sum();
    Ok(total / n_obs as f64)
}

/// Fraction of rows whose two closest neurons (on observed coordinates) are
/// not adjacent on the grid.
pub fn topographic_error(data: &MaskedDataset, codebook: &Codebook) -> Result<f64> {
    check_dim(data.p(), codebook.dim())?;
    if codebook.len() < 2 {
        return domain("topographic error needs at least two neurons");
    }
    let grid = codebook.grid();
    let mut errors = 0usize;
    for i in 0..data.n() {
        let (first, second) = two_nearest(data.row(i), data.mask_row(i), codebook);
        if !grid.are_adjacent(first, second)? {
            errors += 1;
        }
    }
    Ok(errors as f64 / data.n() as f64)
}

/// Root mean squared difference over matching positions.
pub fn imputation_rmse(imputations: &ImputationSet, truth: &ImputationSet) -> Result<f64> {
    if truth.is_empty() {
        return domain("RMSE over an empty set of positions is undefined");
    }
    if !imputations.same_positions(truth) {
        return Err(Error::CoverageMismatch);
    }
    let sse: f64 = imputations
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a.value - b.value).powi(2))
        .sum();
    Ok((sse / truth.len() as f64).sqrt())
}

fn choose2(v: usize) -> f64 {
    let v = v as f64;
    v * (v - 1.0) / 2.0
}

/// Adjusted Rand index of two labelings of the same items.
///
/// Returns 1 when both partitions are trivial in the same way (the index is
/// otherwise 0/0).
pub fn adjusted_rand_index<A, B>(labels_a: &[A], labels_b: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash,
    B: Eq + std::hash::Hash,
{
    if labels_a.len() != labels_b.len() {
        return Err(Error::DimensionMismatch {
            expected: labels_a.len(),
            actual: labels_b.len(),
        });
    }
    let n = labels_a.len();
    if n < 2 {
        return domain("adjusted Rand index needs at least two items");
    }
    let mut table: HashMap<(&A, &B), usize> = HashMap::new();
    let mut rows: HashMap<&A, usize> = HashMap::new();
    let mut cols: HashMap<&B, usize> = HashMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Every metric that is defined for a run.
///
/// Map metrics need a codebook, RMSE needs a nonempty truth set and both ARI
/// values need labels. Cluster labels for the map are masked-winner
/// assignments.
pub fn evaluate<L: Eq + std::hash::Hash>(
    data: &MaskedDataset,
    codebook: Option<&Codebook>,
    imputations: &ImputationSet,
    truth: Option<&ImputationSet>,
    labels: Option<&[L]>,
    wall_time: Duration,
) -> Result<MetricsReport> {
    let mut report = MetricsReport {
        wall_time: wall_time.as_secs_f64(),
        ..Default::default()
    };
    if let Some(truth) = truth.filter(|t| !t.is_empty()) {
        report.imputation_rmse = Some(imputation_rmse(imputations, truth)?);
    }
    if let Some(cb) = codebook {
        report.quantization = Some(quantization_error(data, cb)?);
        if cb.len() >= 2 {
            report.topographic = Some(topographic_error(data, cb)?);
        }
        if let Some(labels) = labels {
            if labels.len() != data.n() {
                return Err(Error::DimensionMismatch {
                    expected: data.n(),
                    actual: labels.len(),
                });
            }
            if data.n() >= 2 {
                let winners = assign(data, cb)?;
                report.ari = Some(adjusted_rand_index(&winners, labels)?);
                let groups = labels.iter().collect::<std::collections::HashSet<_>>().len();
                let merged = ward_clusters(cb, groups.min(cb.len()))?;
                let rows: Vec<usize> = winners.iter().map(|&k| merged[k]).collect();
                report.ari_merged = Some(adjusted_rand_index(&rows, labels)?);
            }
        }
    }
    Ok(report)
}
