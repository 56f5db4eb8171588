//! Complete-data self-organizing map: winner search, the neighborhood-weighted
//! loss, the stochastic Kohonen update and the epoch-based training loop.

use ndarray::{Array2, ArrayView2};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::topology::{GridSpec, NeighborhoodTable};

/// `K x p` prototype matrix attached to a grid; row `k` belongs to neuron `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    grid: GridSpec,
    weights: Array2<f64>,
}

impl Codebook {
    pub fn new(grid: GridSpec, weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: weights.nrows(),
            });
        }
        if weights.ncols() == 0 {
            return domain("codebook must have at least one column");
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return domain("codebook entries must be finite");
        }
        Ok(Self {
            grid,
            weights: weights.as_standard_layout().into_owned(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn prototype(&self, k: usize) -> &[f64] {
        let p = self.dim();
        &self.flat()[k * p..(k + 1) * p]
    }

    pub(crate) fn flat(&self) -> &[f64] {
        self.weights.as_slice().expect("standard layout")
    }

    pub(crate) fn flat_mut(&mut self) -> &mut [f64] {
        self.weights.as_slice_mut().expect("standard layout")
    }

    pub fn into_weights(self) -> Array2<f64> {
        self.weights
    }
}

/// Linear radius and learning-step schedules over `epochs` passes.
///
/// Epoch `t` (counted from 1) uses `radius_at(t)` and `rate_at(t)`; index 0
/// is the initial value and `epochs` the final one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub epochs: usize,
    pub radius_start: f64,
    pub radius_end: f64,
    pub rate_start: f64,
    pub rate_end: f64,
    pub seed: u64,
}

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_RADIUS_END: f64 = 0.5;
pub const DEFAULT_RATE_START: f64 = 0.05;
pub const DEFAULT_RATE_END: f64 = 0.01;

/// Starting radius used when none is given: the published values for the
/// 9x7 and 16x14 hexagonal maps, the 2/3 distance quantile otherwise.
pub fn default_radius_start(grid: &GridSpec) -> f64 {
    use crate::topology::Topology::Hexagonal;
    let dims = (grid.rows().min(grid.cols()), grid.rows().max(grid.cols()));
    match (grid.topology(), dims) {
        (Hexagonal, (7, 9)) => 4.58,
        (Hexagonal, (14, 16)) => 8.89,
        _ => grid
            .auto_radius()
            .unwrap_or(DEFAULT_RADIUS_END)
            .max(DEFAULT_RADIUS_END),
    }
}

impl TrainingSchedule {
    /// Default schedule for `grid`: 100 epochs, radius from
    /// [`default_radius_start`] down to 0.5, learning step 0.05 to 0.01.
    pub fn for_grid(grid: &GridSpec, seed: u64) -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            radius_start: default_radius_start(grid),
            radius_end: DEFAULT_RADIUS_END,
            rate_start: DEFAULT_RATE_START,
            rate_end: DEFAULT_RATE_END,
            seed,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_radius(mut self, start: f64, end: f64) -> Self {
        self.radius_start = start;
        self.radius_end = end;
        self
    }

    pub fn with_rate(mut self, start: f64, end: f64) -> Self {
        self.rate_start = start;
        self.rate_end = end;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return domain("number of epochs must be positive");
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.radius_start) || !ok(self.radius_end) || self.radius_start < self.radius_end {
            return domain(format!(
                "radius schedule must satisfy radius_start >= radius_end > 0, got {} -> {}",
                self.radius_start, self.radius_end
            ));
        }
        if !ok(self.rate_start)
            || !ok(self.rate_end)
            || self.rate_start < self.rate_end
            || self.rate_start > 1.0
        {
            return domain(format!(
                "learning-step schedule must satisfy 1 >= rate_start >= rate_end > 0, got {} -> {}",
                self.rate_start, self.rate_end
            ));
        }
        Ok(())
    }

    pub fn radius_at(&self, t: usize) -> f64 {
        interpolate(self.radius_start, self.radius_end, t, self.epochs)
    }

    pub fn rate_at(&self, t: usize) -> f64 {
        interpolate(self.rate_start, self.rate_end, t, self.epochs)
    }
}

fn interpolate(start: f64, end: f64, t: usize, total: usize) -> f64 {
    start + (end - start) * (t as f64 / total as f64)
}

/// Order in which rows are presented within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisitOrder {
    /// Rows `0..n` in order every epoch.
    Sequential,
    /// A fresh seeded permutation every epoch.
    Shuffled,
}

/// Squared distance restricted to coordinates where `mask` is true.
#[inline]
pub(crate) fn masked_sq_dist(x: &[f64], mask: Option<&[bool]>, w: &[f64]) -> f64 {
    let mut acc = 0.0;
    match mask {
        Some(m) => {
            for j in 0..x.len() {
                if m[j] {
                    let d = x[j] - w[j];
                    acc += d * d;
                }
            }
        }
        None => {
            for j in 0..x.len() {
                let d = x[j] - w[j];
                acc += d * d;
            }
        }
    }
    acc
}

/// Nearest neuron; ties go to the smallest index.
#[inline]
pub(crate) fn nearest(x: &[f64], mask: Option<&[bool]>, flat: &[f64], p: usize) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, w) in flat.chunks_exact(p).enumerate() {
        let d = masked_sq_dist(x, mask, w);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// `w_k <- w_k + eps * V(k, winner) * (x - w_k)` for every neuron.
#[inline]
pub(crate) fn pull_all(flat: &mut [f64], p: usize, x: &[f64], eps: f64, weights: &[f64]) {
    for (w, &v) in flat.chunks_exact_mut(p).zip(weights) {
        let alpha = eps * v;
        for j in 0..p {
            w[j] += alpha * (x[j] - w[j]);
        }
    }
}

/// Best matching unit of `x`: `argmin_k ||x - w_k||`, smallest index on ties.
pub fn winner(x: &[f64], codebook: &Codebook) -> Result<usize> {
    if x.len() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            actual: x.len(),
        });
    }
    Ok(nearest(x, None, codebook.flat(), codebook.dim()))
}

/// Neighborhood-weighted quantization loss
/// `(1/2n) sum_i sum_k V(k, h(x_i)) ||x_i - w_k||^2`.
pub fn som_loss(x: ArrayView2<'_, f64>, codebook: &Codebook, radius: f64) -> Result<f64> {
    if x.nrows() == 0 {
        return domain("loss of an empty data matrix is undefined");
    }
    check_dim(x.ncols(), codebook.dim())?;
    let table = NeighborhoodTable::for_grid(codebook.grid(), radius)?;
    let p = codebook.dim();
    let flat = codebook.flat();
    let mut total = 0.0;
    for row in x.rows() {
        let row = row.to_vec();
        let ell = nearest(&row, None, flat, p);
        for (w, &v) in flat.chunks_exact(p).zip(table.row(ell)) {
            total += v * masked_sq_dist(&row, None, w);
        }
    }
    Ok(total / (2.0 * x.nrows() as f64))
}

/// One stochastic Kohonen step toward `x`, returning the updated codebook.
pub fn kohonen_update(x: &[f64], codebook: &Codebook, rate: f64, radius: f64) -> Result<Codebook> {
    if !(rate > 0.0 && rate <= 1.0) {
        return domain(format!("learning step must lie in (0, 1], got {rate}"));
    }
    let ell = winner(x, codebook)?;
    let table = NeighborhoodTable::for_grid(codebook.grid(), radius)?;
    let mut out = codebook.clone();
    let p = out.dim();
    pull_all(out.flat_mut(), p, x, rate, table.row(ell));
    Ok(out)
}

pub(crate) fn check_dim(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Initial codebook: `K` rows of `x` drawn uniformly without replacement
/// (with replacement when `n < K`).
pub fn init_codebook(x: ArrayView2<'_, f64>, grid: &GridSpec, seed: u64) -> Result<Codebook> {
    init_codebook_with(x, grid, &mut rng_for(seed))
}

pub(crate) fn init_codebook_with<R: Rng>(
    x: ArrayView2<'_, f64>,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<Codebook> {
    let n = x.nrows();
    if n == 0 {
        return domain("cannot initialize a codebook from an empty data matrix");
    }
    let k = grid.len();
    let picks: Vec<usize> = if n >= k {
        index::sample(rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    };
    let weights = x.select(ndarray::Axis(0), &picks);
    Codebook::new(*grid, weights)
}

/// One pass of the training loop. Shared by every Kohonen-style trainer.
pub(crate) struct Epoch<'a> {
    pub table: &'a NeighborhoodTable,
    pub rate: f64,
}

pub(crate) fn epoch_order<R: Rng>(order: &mut [usize], visit: VisitOrder, rng: &mut R) {
    if visit == VisitOrder::Shuffled {
        order.shuffle(rng);
    }
}

/// Runs `schedule.epochs` passes of the standard algorithm on `x` with rows
/// presented in seeded random order.
pub fn train_som(x: ArrayView2<'_, f64>, grid: &GridSpec, schedule: &TrainingSchedule) -> Result<Codebook> {
    train_som_with(x, grid, schedule, VisitOrder::Shuffled)
}

pub fn train_som_with(
    x: ArrayView2<'_, f64>,
    grid: &GridSpec,
    schedule: &TrainingSchedule,
    visit: VisitOrder,
) -> Result<Codebook> {
    schedule.validate()?;
    let n = x.nrows();
    if n == 0 {
        return domain("cannot train on an empty data matrix");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("training data must be finite");
    }
    if n < grid.len() {
        log::warn!("training {} neurons on only {} rows", grid.len(), n);
    }
    let x = x.as_standard_layout();
    let data = x.as_slice().expect("standard layout");
    let mut rng = rng_for(schedule.seed);
    let mut codebook = init_codebook_with(x.view(), grid, &mut rng)?;
    let distances = grid.distance_matrix();
    let p = codebook.dim();
    let mut order: Vec<usize> = (0..n).collect();
    for t in 1..=schedule.epochs {
        let table = NeighborhoodTable::new(&distances, grid.len(), schedule.radius_at(t))?;
        let epoch = Epoch {
            table: &table,
            rate: schedule.rate_at(t),
        };
        epoch_order(&mut order, visit, &mut rng);
        let flat = codebook.flat_mut();
        for &i in &order {
            let row = &data[i * p..(i + 1) * p];
            let ell = nearest(row, None, flat, p);
            pull_all(flat, p, row, epoch.rate, epoch.table.row(ell));
        }
    }
    Ok(codebook)
}
