//! Observation masks, the masked winner, the decomposed loss over observed and
//! imputed coordinates, and the closed-form imputation update.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::som::{check_dim, masked_sq_dist, nearest, Codebook};
use crate::topology::NeighborhoodTable;

/// An `n x p` value matrix together with its observation mask
/// (`true` = observed).
///
/// Entries of `values` at masked positions hold whatever imputation or
/// placeholder is current; they are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    values: Array2<f64>,
    mask: Array2<bool>,
}

impl MaskedDataset {
    pub fn new(values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return domain(format!(
                "value matrix is {:?} but mask is {:?}",
                values.dim(),
                mask.dim()
            ));
        }
        if values.ncols() == 0 {
            return domain("dataset must have at least one column");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("dataset values must be finite (masked entries included)");
        }
        for (i, row) in mask.rows().into_iter().enumerate() {
            if !row.iter().any(|&m| m) {
                return Err(Error::EmptyRow { row: i });
            }
        }
        Ok(Self {
            values: values.as_standard_layout().into_owned(),
            mask: mask.as_standard_layout().into_owned(),
        })
    }

    pub fn complete(values: Array2<f64>) -> Result<Self> {
        let mask = Array2::from_elem(values.dim(), true);
        Self::new(values, mask)
    }

    /// Builds a dataset from optional entries; `None` becomes a masked
    /// entry with placeholder value 0.
    pub fn from_options(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut values = Array2::zeros((n, p));
        let mut mask = Array2::from_elem((n, p), false);
        for (i, row) in rows.iter().enumerate() {
            check_dim(row.len(), p)?;
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    values[[i, j]] = *v;
                    mask[[i, j]] = true;
                }
            }
        }
        Self::new(values, mask)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.values.as_slice().expect("standard layout")[i * p..(i + 1) * p]
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        let p = self.p();
        &self.mask.as_slice().expect("standard layout")[i * p..(i + 1) * p]
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[[i, j]]
    }

    pub fn is_row_complete(&self, i: usize) -> bool {
        self.mask_row(i).iter().all(|&m| m)
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.len() - self.observed_count()
    }

    pub fn has_missing(&self) -> bool {
        self.mask.iter().any(|&m| !m)
    }

    /// Masked positions in row-major order.
    pub fn missing_positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let p = self.p();
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| !m)
            .map(move |(idx, _)| (idx / p, idx % p))
    }

    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.is_row_complete(i)).collect()
    }

    /// Fails on the first column without any observed entry.
    pub fn check_columns(&self) -> Result<()> {
        for (j, col) in self.mask.columns().into_iter().enumerate() {
            if !col.iter().any(|&m| m) {
                return Err(Error::EmptyColumn { column: j });
            }
        }
        Ok(())
    }

    /// Copy of the dataset whose masked entries hold `imputations`.
    pub fn with_imputations(&self, imputations: &ImputationSet) -> Result<Self> {
        if !imputations.covers(self) {
            return Err(Error::CoverageMismatch);
        }
        let mut out = self.clone();
        out.fill(imputations);
        Ok(out)
    }

    pub(crate) fn fill(&mut self, imputations: &ImputationSet) {
        for e in imputations.iter() {
            self.values[[e.row, e.col]] = e.value;
        }
    }

    /// Observed entries merged with `imputations`.
    pub fn completed(&self, imputations: &ImputationSet) -> Result<Array2<f64>> {
        Ok(self.with_imputations(imputations)?.values)
    }

    /// Current contents of the masked positions.
    pub fn current_imputations(&self) -> ImputationSet {
        ImputationSet::from_sorted(
            self.missing_positions()
                .map(|(row, col)| Imputation {
                    row,
                    col,
                    value: self.values[[row, col]],
                })
                .collect(),
        )
    }

    /// Rows selected by index, keeping their masks.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.values.select(ndarray::Axis(0), rows),
            self.mask.select(ndarray::Axis(0), rows),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Imputation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Values for masked positions, kept sorted in row-major order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationSet {
    entries: Vec<Imputation>,
}

impl ImputationSet {
    pub fn new(mut entries: Vec<Imputation>) -> Result<Self> {
        entries.sort_by_key(|e| (e.row, e.col));
        if entries
            .windows(2)
            .any(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col))
        {
            return domain("duplicate position in imputation set");
        }
        if entries.iter().any(|e| !e.value.is_finite()) {
            return domain("imputed values must be finite");
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_sorted(entries: Vec<Imputation>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Imputation> {
        self.entries.iter()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.value)
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&(row, col), |e| (e.row, e.col))
            .ok()
            .map(|i| self.entries[i].value)
    }

    pub fn same_positions(&self, other: &ImputationSet) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|(a, b)| (a.row, a.col) == (b.row, b.col))
    }

    /// True iff the positions are exactly the masked positions of `data`.
    pub fn covers(&self, data: &MaskedDataset) -> bool {
        self.len() == data.missing_count()
            && self
                .iter()
                .zip(data.missing_positions())
                .all(|(e, pos)| (e.row, e.col) == pos)
    }

    /// Largest absolute difference between matching entries.
    pub fn max_abs_change(&self, other: &ImputationSet) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a.value - b.value).abs())
            .fold(0.0, f64::max)
    }
}

impl<'a> IntoIterator for &'a ImputationSet {
    type Item = &'a Imputation;
    type IntoIter = std::slice::Iter<'a, Imputation>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

fn check_mask_row(x_row: &[f64], m_row: &[bool], codebook: &Codebook) -> Result<()> {
    check_dim(x_row.len(), codebook.dim())?;
    check_dim(m_row.len(), codebook.dim())?;
    if !m_row.iter().any(|&m| m) {
        return domain("masked winner needs at least one observed coordinate");
    }
    Ok(())
}

/// Winner computed on the observed coordinates only.
pub fn masked_winner(x_row: &[f64], m_row: &[bool], codebook: &Codebook) -> Result<usize> {
    check_mask_row(x_row, m_row, codebook)?;
    Ok(nearest(x_row, Some(m_row), codebook.flat(), codebook.dim()))
}

/// Second-closest neuron under the masked distance.
pub fn second_masked_winner(x_row: &[f64], m_row: &[bool], codebook: &Codebook) -> Result<usize> {
    check_mask_row(x_row, m_row, codebook)?;
    if codebook.len() < 2 {
        return domain("second winner needs at least two neurons");
    }
    Ok(two_nearest(x_row, m_row, codebook).1)
}

/// (winner, runner-up) under the masked distance; smallest index on ties.
pub(crate) fn two_nearest(x: &[f64], m: &[bool], codebook: &Codebook) -> (usize, usize) {
    let p = codebook.dim();
    let (mut first, mut second) = (usize::MAX, usize::MAX);
    let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
    for (k, w) in codebook.flat().chunks_exact(p).enumerate() {
        let d = masked_sq_dist(x, Some(m), w);
        if d < d1 {
            second = first;
            d2 = d1;
            first = k;
            d1 = d;
        } else if d < d2 {
            second = k;
            d2 = d;
        }
    }
    (first, second)
}

/// `F_missom` split into its observed and imputed parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub observed: f64,
    pub missing: f64,
}

/// Neighborhood-weighted loss on the dataset completed by `imputations`,
/// with winners taken on observed coordinates.
pub fn missom_loss(
    data: &MaskedDataset,
    imputations: &ImputationSet,
    codebook: &Codebook,
    radius: f64,
) -> Result<LossParts> {
    check_dim(data.p(), codebook.dim())?;
    let aug = data.with_imputations(imputations)?;
    let table = NeighborhoodTable::for_grid(codebook.grid(), radius)?;
    let p = codebook.dim();
    let flat = codebook.flat();
    let (mut total, mut observed, mut missing) = (0.0, 0.0, 0.0);
    for i in 0..aug.n() {
        let x = aug.row(i);
        let m = aug.mask_row(i);
        let ell = nearest(x, Some(m), flat, p);
        for (w, &v) in flat.chunks_exact(p).zip(table.row(ell)) {
            total += v * masked_sq_dist(x, None, w);
            let (mut o, mut u) = (0.0, 0.0);
            for j in 0..p {
                let d = x[j] - w[j];
                if m[j] {
                    o += d * d;
                } else {
                    u += d * d;
                }
            }
            observed += v * o;
            missing += v * u;
        }
    }
    let scale = 2.0 * aug.n() as f64;
    Ok(LossParts {
        total: total / scale,
        observed: observed / scale,
        missing: missing / scale,
    })
}

/// For every neuron `l`, the neighborhood-weighted mean of all prototypes
/// `sum_k V(k,l) w_k / sum_k V(k,l)`, as a `K x p` row-major buffer.
pub(crate) fn smoothed_prototypes(codebook: &Codebook, table: &NeighborhoodTable) -> Vec<f64> {
    let (k_len, p) = (codebook.len(), codebook.dim());
    let flat = codebook.flat();
    let mut out = vec![0.0; k_len * p];
    for l in 0..k_len {
        let weights = table.row(l);
        let target = &mut out[l * p..(l + 1) * p];
        let mut denom = 0.0;
        for (w, &v) in flat.chunks_exact(p).zip(weights) {
            denom += v;
            for j in 0..p {
                target[j] += v * w[j];
            }
        }
        for t in target.iter_mut() {
            *t /= denom;
        }
    }
    out
}

/// Closed-form minimizer of the imputed part of the loss for a fixed
/// codebook: each masked entry becomes the neighborhood-weighted mean of the
/// prototypes around the row's masked winner.
pub fn impute_update(data: &MaskedDataset, codebook: &Codebook, radius: f64) -> Result<ImputationSet> {
    check_dim(data.p(), codebook.dim())?;
    let table = NeighborhoodTable::for_grid(codebook.grid(), radius)?;
    Ok(impute_with_table(data, codebook, &table))
}

pub(crate) fn impute_with_table(
    data: &MaskedDataset,
    codebook: &Codebook,
    table: &NeighborhoodTable,
) -> ImputationSet {
    if !data.has_missing() {
        return ImputationSet::default();
    }
    let p = data.p();
    let smoothed = smoothed_prototypes(codebook, table);
    let mut entries = Vec::with_capacity(data.missing_count());
    for i in 0..data.n() {
        let m = data.mask_row(i);
        if m.iter().all(|&o| o) {
            continue;
        }
        let ell = nearest(data.row(i), Some(m), codebook.flat(), p);
        let target = &smoothed[ell * p..(ell + 1) * p];
        for j in 0..p {
            if !m[j] {
                entries.push(Imputation {
                    row: i,
                    col: j,
                    value: target[j],
                });
            }
        }
    }
    ImputationSet::from_sorted(entries)
}

/// Masked-winner assignment of every row.
pub fn assign(data: &MaskedDataset, codebook: &Codebook) -> Result<Vec<usize>> {
    check_dim(data.p(), codebook.dim())?;
    Ok((0..data.n())
        .map(|i| nearest(data.row(i), Some(data.mask_row(i)), codebook.flat(), codebook.dim()))
        .collect())
}

/// Masked entries replaced by the coordinates of each row's masked winner.
pub(crate) fn winner_imputations(data: &MaskedDataset, codebook: &Codebook) -> ImputationSet {
    let p = data.p();
    let mut entries = Vec::with_capacity(data.missing_count());
    for i in 0..data.n() {
        let m = data.mask_row(i);
        if m.iter().all(|&o| o) {
            continue;
        }
        let w = codebook.prototype(nearest(data.row(i), Some(m), codebook.flat(), p));
        for j in 0..p {
            if !m[j] {
                entries.push(Imputation {
                    row: i,
                    col: j,
                    value: w[j],
                });
            }
        }
    }
    ImputationSet::from_sorted(entries)
}
