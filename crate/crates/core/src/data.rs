//! Synthetic benchmark data: Gaussian mixtures, noisy replicates of a base
//! dataset, and amputation under MCAR, MAR and MNAR mechanisms.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::masked::{Imputation, ImputationSet, MaskedDataset};
use crate::som::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub p: usize,
    pub groups: usize,
    /// Correlation shared by every pair of coordinates within a group.
    pub correlation: f64,
    /// Standard deviation of the centered normal the group means are drawn from.
    pub mean_sd: f64,
    pub seed: u64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            p: 5,
            groups: 4,
            correlation: 0.5,
            mean_sd: 5.0,
            seed: 0,
        }
    }
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.groups == 0 {
            return domain("mixture needs n, p and groups all positive");
        }
        if self.groups > self.n {
            return domain(format!("cannot split {} rows into {} groups", self.n, self.groups));
        }
        if !(self.mean_sd >= 0.0) || !self.mean_sd.is_finite() {
            return domain("mean_sd must be a non-negative number");
        }
        let rho = self.correlation;
        let p = self.p as f64;
        // eigenvalues of the constant-correlation matrix
        if !(1.0 - rho > 0.0) || !(1.0 + (p - 1.0) * rho > 0.0) {
            return domain(format!(
                "correlation {rho} does not give a positive definite covariance in dimension {}",
                self.p
            ));
        }
        Ok(())
    }

    /// Group sizes: equal, remainder spread over the first groups.
    pub fn group_sizes(&self) -> Vec<usize> {
        let base = self.n / self.groups;
        let extra = self.n % self.groups;
        (0..self.groups).map(|g| base + usize::from(g < extra)).collect()
    }
}

/// Draws a Gaussian mixture with unit variances and constant within-group
/// correlation. Rows come in random order; `labels[i]` is the group of row `i`.
pub fn gen_gaussian_mixture(spec: &MixtureSpec) -> Result<(Array2<f64>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed);
    let (n, p) = (spec.n, spec.p);
    let mean_dist = Normal::new(0.0, spec.mean_sd).map_err(|e| Error::Domain(e.to_string()))?;
    let means: Vec<Vec<f64>> = (0..spec.groups)
        .map(|_| (0..p).map(|_| mean_dist.sample(&mut rng)).collect())
        .collect();

    // symmetric square root of (1 - rho) I + rho 11^T:
    // sqrt(1 - rho) I + c 11^T with c = (sqrt(1 + (p-1) rho) - sqrt(1 - rho)) / p
    let rho = spec.correlation;
    let diag = (1.0 - rho).sqrt();
    let common = ((1.0 + (p as f64 - 1.0) * rho).sqrt() - diag) / p as f64;

    let mut labels: Vec<usize> = spec
        .group_sizes()
        .into_iter()
        .enumerate()
        .flat_map(|(g, size)| std::iter::repeat_n(g, size))
        .collect();
    labels.shuffle(&mut rng);

    let mut x = Array2::zeros((n, p));
    let mut z = vec![0.0; p];
    for (i, &g) in labels.iter().enumerate() {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let s: f64 = z.iter().sum();
        for j in 0..p {
            x[[i, j]] = means[g][j] + diag * z[j] + common * s;
        }
    }
    Ok((x, labels))
}

/// Adds independent noise to every entry; column `j` gets standard deviation
/// `|mean_j| / 10`.
pub fn perturb_dataset(x: ArrayView2<'_, f64>, seed: u64) -> Result<Array2<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return domain("dataset must be finite");
    }
    let mut rng = rng_for(seed);
    let mut out = x.to_owned();
    let n = x.nrows().max(1) as f64;
    let sds: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|c| (c.sum() / n).abs() / 10.0)
        .collect();
    for mut row in out.rows_mut() {
        for (v, &sd) in row.iter_mut().zip(&sds) {
            let z: f64 = StandardNormal.sample(&mut rng);
            if sd > 0.0 {
                *v += sd * z;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar];

    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::Mar => "MAR",
            Mechanism::Mnar => "MNAR",
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MCAR" => Ok(Mechanism::Mcar),
            "MAR" => Ok(Mechanism::Mar),
            "MNAR" => Ok(Mechanism::Mnar),
            other => domain(format!("unknown missingness mechanism '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmputationSpec {
    pub rate: f64,
    pub mechanism: Mechanism,
    pub seed: u64,
}

/// Intercept calibration precision on the mean masking probability.
pub const CALIBRATION_TOLERANCE: f64 = 1e-4;

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Column-standardized copy; constant columns become zero.
fn standardize(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mut z = x.to_owned();
    for mut col in z.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        col.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
    }
    z
}

/// Logistic masking scores `sum_{l in S_j} z_il` with unit weights, where
/// `S_j` excludes column `j` under MAR and includes it under MNAR.
fn logistic_scores(z: &Array2<f64>, mechanism: Mechanism) -> Array2<f64> {
    let (n, p) = z.dim();
    let mut scores = Array2::zeros((n, p));
    for i in 0..n {
        let total: f64 = z.row(i).sum();
        for j in 0..p {
            scores[[i, j]] = match mechanism {
                Mechanism::Mnar => total,
                _ => total - z[[i, j]],
            };
        }
    }
    scores
}

/// Expected fraction of column `j` left masked once fully masked rows have
/// one uniformly chosen entry restored.
#[cfg(test)]
fn expected_masked_fraction(scores: &Array2<f64>, intercepts: &[f64], j: usize) -> f64 {
    let (n, p) = scores.dim();
    let mut acc = 0.0;
    for i in 0..n {
        let mut all = 1.0;
        let mut own = 0.0;
        for l in 0..p {
            let pr = sigmoid(intercepts[l] + scores[[i, l]]);
            all *= pr;
            if l == j {
                own = pr;
            }
        }
        acc += own - all / p as f64;
    }
    acc / n as f64
}

/// Per-column intercepts such that each column's expected post-repair masked
/// fraction equals `rate`, by coordinate-wise bisection swept to a fixed point.
fn calibrate_intercepts(scores: &Array2<f64>, rate: f64) -> Vec<f64> {
    let (n, p) = scores.dim();
    let mut intercepts = vec![0.0; p];
    let spread = scores.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let bound = spread + 60.0;
    let mut others = vec![0.0; n];
    for _sweep in 0..500 {
        let mut worst = 0.0_f64;
        for j in 0..p {
            for (i, o) in others.iter_mut().enumerate() {
                *o = (0..p)
                    .filter(|&l| l != j)
                    .map(|l| sigmoid(intercepts[l] + scores[[i, l]]))
                    .product();
            }
            // fraction(a) = mean_i sigmoid(a + s_ij) * (1 - others_i / p), increasing in a
            let fraction = |a: f64| {
                others
                    .iter()
                    .enumerate()
                    .map(|(i, o)| sigmoid(a + scores[[i, j]]) * (1.0 - o / p as f64))
                    .sum::<f64>()
                    / n as f64
            };
            let (mut lo, mut hi) = (-bound, bound);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if fraction(mid) < rate {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let next = 0.5 * (lo + hi);
            worst = worst.max((next - intercepts[j]).abs());
            intercepts[j] = next;
        }
        if worst < 1e-9 {
            break;
        }
    }
    intercepts
}

/// Masks entries of a complete matrix under the requested mechanism.
///
/// Returns the partially observed dataset (masked entries hold 0) and the
/// original values at the masked positions. Any row left without an observed
/// entry has one uniformly chosen entry restored.
pub fn ampute(x: ArrayView2<'_, f64>, spec: &AmputationSpec) -> Result<(MaskedDataset, ImputationSet)> {
    if !(0.0..1.0).contains(&spec.rate) {
        return domain(format!("amputation rate must lie in [0, 1), got {}", spec.rate));
    }
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return domain("cannot ampute an empty matrix");
    }
    if p == 1 && spec.rate > 0.0 {
        return domain("a single-column matrix cannot lose entries and keep one observed per row");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("amputation input must be finite");
    }
    let mut rng = rng_for(spec.seed);
    let mut mask = Array2::from_elem((n, p), true);
    if spec.rate > 0.0 {
        match spec.mechanism {
            Mechanism::Mcar => {
                for m in mask.iter_mut() {
                    *m = rng.random::<f64>() >= spec.rate;
                }
            }
            Mechanism::Mar | Mechanism::Mnar => {
                let z = standardize(x);
                let scores = logistic_scores(&z, spec.mechanism);
                let intercepts = calibrate_intercepts(&scores, spec.rate);
                for i in 0..n {
                    for j in 0..p {
                        let pr = sigmoid(intercepts[j] + scores[[i, j]]);
                        mask[[i, j]] = rng.random::<f64>() >= pr;
                    }
                }
            }
        }
        for i in 0..n {
            if mask.row(i).iter().all(|&m| !m) {
                let j = rng.random_range(0..p);
                mask[[i, j]] = true;
            }
        }
    }
    let mut values = x.to_owned();
    let mut truth = Vec::new();
    for i in 0..n {
        for j in 0..p {
            if !mask[[i, j]] {
                truth.push(Imputation {
                    row: i,
                    col: j,
                    value: x[[i, j]],
                });
                values[[i, j]] = 0.0;
            }
        }
    }
    Ok((MaskedDataset::new(values, mask)?, ImputationSet::new(truth)?))
}
