//! Comparison methods: deletion SOM, Cottrell's observed-coordinate SOM, mean
//! imputation and a single-pass weighted kNN imputer.

use ndarray::Array2;
use web_time::{Duration, Instant};

use crate::error::{domain, Error, Result};
use crate::masked::{winner_imputations, Imputation, ImputationSet, MaskedDataset};
use crate::misssom::{init_imputations, InitStrategy};
use crate::som::{
    epoch_order, init_codebook_with, nearest, rng_for, train_som, Codebook, TrainingSchedule,
    VisitOrder,
};
use crate::topology::{GridSpec, NeighborhoodTable};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    /// Absent for pure imputers.
    pub codebook: Option<Codebook>,
    pub imputations: ImputationSet,
    pub completed: Array2<f64>,
    pub wall_time: Duration,
}

/// Trains on complete rows only; incomplete rows are assigned afterwards and
/// imputed from their winning prototype.
pub fn deletion_som(
    data: &MaskedDataset,
    grid: &GridSpec,
    schedule: &TrainingSchedule,
) -> Result<BaselineResult> {
    let start = Instant::now();
    let complete = data.complete_rows();
    if complete.len() < grid.len() {
        return Err(Error::InsufficientCompleteObservations {
            complete: complete.len(),
            required: grid.len(),
        });
    }
    let rows = data.values().select(ndarray::Axis(0), &complete);
    let codebook = train_som(rows.view(), grid, schedule)?;
    let imputations = winner_imputations(data, &codebook);
    Ok(BaselineResult {
        completed: data.completed(&imputations)?,
        codebook: Some(codebook),
        imputations,
        wall_time: start.elapsed(),
    })
}

/// Kohonen training with winners and prototype updates restricted to the
/// coordinates observed in the current row; masked entries are imputed from
/// the winning prototype after training.
///
/// The codebook is initialized from rows of the mean-imputed data.
pub fn cottrell_som(
    data: &MaskedDataset,
    grid: &GridSpec,
    schedule: &TrainingSchedule,
) -> Result<BaselineResult> {
    cottrell_som_with(data, grid, schedule, VisitOrder::Shuffled)
}

pub fn cottrell_som_with(
    data: &MaskedDataset,
    grid: &GridSpec,
    schedule: &TrainingSchedule,
    visit: VisitOrder,
) -> Result<BaselineResult> {
    schedule.validate()?;
    let start = Instant::now();
    let init = init_imputations(data, InitStrategy::Mean)?;
    let aug = data.with_imputations(&init)?;
    let mut rng = rng_for(schedule.seed);
    let mut codebook = init_codebook_with(aug.values().view(), grid, &mut rng)?;
    let distances = grid.distance_matrix();
    let p = data.p();
    let mut order: Vec<usize> = (0..data.n()).collect();
    for t in 1..=schedule.epochs {
        let table = NeighborhoodTable::new(&distances, grid.len(), schedule.radius_at(t))?;
        let rate = schedule.rate_at(t);
        epoch_order(&mut order, visit, &mut rng);
        let flat = codebook.flat_mut();
        for &i in &order {
            let x = data.row(i);
            let m = data.mask_row(i);
            let ell = nearest(x, Some(m), flat, p);
            pull_observed(flat, p, x, m, rate, table.row(ell));
        }
    }
    let imputations = winner_imputations(data, &codebook);
    Ok(BaselineResult {
        completed: data.completed(&imputations)?,
        codebook: Some(codebook),
        imputations,
        wall_time: start.elapsed(),
    })
}

/// Kohonen step that moves only the coordinates observed in `x`.
#[inline]
pub(crate) fn pull_observed(flat: &mut [f64], p: usize, x: &[f64], m: &[bool], rate: f64, weights: &[f64]) {
    for (w, &v) in flat.chunks_exact_mut(p).zip(weights) {
        let alpha = rate * v;
        for j in 0..p {
            if m[j] {
                w[j] += alpha * (x[j] - w[j]);
            }
        }
    }
}

/// Column-mean imputation.
pub fn mean_impute(data: &MaskedDataset) -> Result<BaselineResult> {
    let start = Instant::now();
    let imputations = init_imputations(data, InitStrategy::Mean)?;
    Ok(BaselineResult {
        completed: data.completed(&imputations)?,
        codebook: None,
        imputations,
        wall_time: start.elapsed(),
    })
}

pub const KNN_DISTANCE_OFFSET: f64 = 1e-12;

/// Scaled distance over coordinates observed in both rows,
/// `sqrt(p/|J| * sum_J (a_j - b_j)^2)`; `None` when the rows share none.
pub(crate) fn overlap_distance(data: &MaskedDataset, a: usize, b: usize) -> Option<f64> {
    let (xa, ma) = (data.row(a), data.mask_row(a));
    let (xb, mb) = (data.row(b), data.mask_row(b));
    let mut shared = 0usize;
    let mut acc = 0.0;
    for j in 0..data.p() {
        if ma[j] && mb[j] {
            shared += 1;
            let d = xa[j] - xb[j];
            acc += d * d;
        }
    }
    (shared > 0).then(|| (data.p() as f64 / shared as f64 * acc).sqrt())
}

/// Single-pass kNN imputation: each masked entry is the inverse-distance
/// weighted mean of the `k` nearest donors observing that coordinate, or the
/// column mean when no donor does.
pub fn knn_impute(data: &MaskedDataset, k: usize) -> Result<BaselineResult> {
    if k == 0 {
        return domain("k must be at least 1");
    }
    let start = Instant::now();
    let means = init_imputations(data, InitStrategy::Mean)?;
    let p = data.p();
    let mut entries = Vec::with_capacity(data.missing_count());
    for i in 0..data.n() {
        let m = data.mask_row(i);
        if m.iter().all(|&o| o) {
            continue;
        }
        let donors: Vec<(f64, usize)> = (0..data.n())
            .filter(|&r| r != i)
            .filter_map(|r| overlap_distance(data, i, r).map(|d| (d, r)))
            .collect();
        for j in (0..p).filter(|&j| !m[j]) {
            let mut candidates: Vec<(f64, usize)> = donors
                .iter()
                .copied()
                .filter(|&(_, r)| data.is_observed(r, j))
                .collect();
            let value = if candidates.is_empty() {
                means.get(i, j).expect("mean covers every masked entry")
            } else {
                candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                candidates.truncate(k);
                let (mut num, mut den) = (0.0, 0.0);
                for (d, r) in candidates {
                    let w = 1.0 / (d + KNN_DISTANCE_OFFSET);
                    num += w * data.values()[[r, j]];
                    den += w;
                }
                num / den
            };
            entries.push(Imputation { row: i, col: j, value });
        }
    }
    let imputations = ImputationSet::new(entries)?;
    Ok(BaselineResult {
        completed: data.completed(&imputations)?,
        codebook: None,
        imputations,
        wall_time: start.elapsed(),
    })
}
