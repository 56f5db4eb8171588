//! Multi-replicate benchmarks over missingness rates, mechanisms and methods.
//!
//! Every (rate, mechanism, algorithm, replicate) cell derives its own seeds
//! from the master seed, so cells can run in any order, in parallel, or alone
//! and still produce the same row.

use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::baselines::{cottrell_som, deletion_som, knn_impute, mean_impute};
use crate::data::{ampute, gen_gaussian_mixture, perturb_dataset, AmputationSpec, Mechanism, MixtureSpec};
use crate::error::{domain, Error, Result};
use crate::masked::{ImputationSet, MaskedDataset};
use crate::metrics::{evaluate, MetricsReport};
use crate::misssom::{misssom_accelerated_with, misssom_basic_with, InitStrategy, DEFAULT_OUTER_ITERS};
use crate::som::{train_som, Codebook, TrainingSchedule, VisitOrder};
use crate::topology::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Som,
    #[serde(rename = "misssom")]
    MissSom,
    #[serde(rename = "misssom-basic")]
    MissSomBasic,
    Cottrell,
    Deletion,
    Mean,
    Knn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Som,
        Algorithm::MissSom,
        Algorithm::MissSomBasic,
        Algorithm::Cottrell,
        Algorithm::Deletion,
        Algorithm::Mean,
        Algorithm::Knn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Som => "som",
            Algorithm::MissSom => "misssom",
            Algorithm::MissSomBasic => "misssom-basic",
            Algorithm::Cottrell => "cottrell",
            Algorithm::Deletion => "deletion",
            Algorithm::Mean => "mean",
            Algorithm::Knn => "knn",
        }
    }

    /// Stable position used in seed derivation.
    pub fn index(&self) -> u64 {
        Algorithm::ALL.iter().position(|a| a == self).unwrap_or(0) as u64
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Domain(format!("unknown algorithm '{s}'")))
    }
}

/// Knobs shared by every method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub grid: GridSpec,
    /// The seed is replaced per run.
    pub schedule: TrainingSchedule,
    pub outer_iters: usize,
    pub knn_k: usize,
    pub init: InitStrategy,
    pub visit: VisitOrder,
}

impl MethodConfig {
    pub fn new(grid: GridSpec) -> Self {
        MethodConfig {
            grid,
            schedule: TrainingSchedule::for_grid(&grid, 0),
            outer_iters: DEFAULT_OUTER_ITERS,
            knn_k: 5,
            init: InitStrategy::Mean,
            visit: VisitOrder::Sequential,
        }
    }
}

/// Output of any method: a map (when the method learns one) and imputations.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub codebook: Option<Codebook>,
    pub imputations: ImputationSet,
    pub completed: Array2<f64>,
    pub wall_time: web_time::Duration,
}

/// Runs one method on a partially observed dataset.
///
/// `som` trains a plain map and is only defined on complete data. `mean` and
/// `knn` are followed by a plain map trained on their completed data so that
/// map metrics exist for them; the reported time covers both steps.
pub fn run_method(algorithm: Algorithm, data: &MaskedDataset, config: &MethodConfig, seed: u64) -> Result<MethodOutput> {
    let schedule = config.schedule.with_seed(seed);
    let grid = &config.grid;
    let start = Instant::now();
    let from_baseline = |b: crate::baselines::BaselineResult| MethodOutput {
        codebook: b.codebook,
        imputations: b.imputations,
        completed: b.completed,
        wall_time: b.wall_time,
    };
    let mut out = match algorithm {
        Algorithm::Som => {
            if data.has_missing() {
                return domain("plain SOM needs complete data; choose a missing-data method");
            }
            let cb = train_som(data.values().view(), grid, &schedule)?;
            MethodOutput {
                codebook: Some(cb),
                imputations: ImputationSet::default(),
                completed: data.values().clone(),
                wall_time: start.elapsed(),
            }
        }
        Algorithm::MissSom | Algorithm::MissSomBasic => {
            let r = if algorithm == Algorithm::MissSom {
                misssom_accelerated_with(data, grid, &schedule, config.visit, config.init)?
            } else {
                misssom_basic_with(data, grid, &schedule, config.outer_iters, config.init)?
            };
            MethodOutput {
                codebook: Some(r.codebook),
                imputations: r.imputations,
                completed: r.completed,
                wall_time: r.wall_time,
            }
        }
        Algorithm::Cottrell => from_baseline(cottrell_som(data, grid, &schedule)?),
        Algorithm::Deletion => from_baseline(deletion_som(data, grid, &schedule)?),
        Algorithm::Mean | Algorithm::Knn => {
            let b = if algorithm == Algorithm::Mean {
                mean_impute(data)?
            } else {
                knn_impute(data, config.knn_k)?
            };
            let cb = train_som(b.completed.view(), grid, &schedule)?;
            MethodOutput {
                codebook: Some(cb),
                ..from_baseline(b)
            }
        }
    };
    if matches!(algorithm, Algorithm::Mean | Algorithm::Knn) {
        out.wall_time = start.elapsed();
    }
    Ok(out)
}

/// Where the complete replicate datasets come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A fresh mixture per replicate; the spec's seed is replaced.
    Mixture(MixtureSpec),
    /// Noisy replicates of a base matrix.
    Perturbed(Array2<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub replicates: usize,
    pub rates: Vec<f64>,
    pub mechanisms: Vec<Mechanism>,
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
    pub source: DataSource,
    pub method: MethodConfig,
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return domain("at least one replicate is required");
        }
        if self.rates.is_empty() || self.mechanisms.is_empty() || self.algorithms.is_empty() {
            return domain("rates, mechanisms and algorithms must be nonempty");
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return domain(format!("missingness rate {r} is outside [0, 1)"));
        }
        if self.algorithms.contains(&Algorithm::Som) {
            return domain("the plain SOM cannot run on amputed data");
        }
        if let DataSource::Mixture(spec) = &self.source {
            spec.validate()?;
        }
        self.method.schedule.validate()?;
        if self.method.outer_iters == 0 || self.method.knn_k == 0 {
            return domain("outer_iters and knn_k must be positive");
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a sequence of words.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c908, |h, &p| splitmix(h ^ splitmix(p)))
}

fn mechanism_code(m: Mechanism) -> u64 {
    Mechanism::ALL.iter().position(|&x| x == m).unwrap_or(0) as u64
}

/// Seed of the complete dataset of replicate `r`, shared by every cell.
pub fn data_seed(master: u64, r: usize) -> u64 {
    derive_seed(&[master, 0xda7a, r as u64])
}

/// Seed of the amputation of replicate `r`, shared across algorithms so that
/// they all face the same mask.
pub fn amputation_seed(master: u64, rate: f64, mechanism: Mechanism, r: usize) -> u64 {
    derive_seed(&[master, 0xa4e, rate.to_bits(), mechanism_code(mechanism), r as u64])
}

/// Seed of the method run in cell (rate, mechanism, algorithm, r).
pub fn cell_seed(master: u64, rate: f64, mechanism: Mechanism, algorithm: Algorithm, r: usize) -> u64 {
    derive_seed(&[master, rate.to_bits(), mechanism_code(mechanism), algorithm.index(), r as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub rate: f64,
    pub mechanism: Mechanism,
    pub algorithm: Algorithm,
    pub replicate: usize,
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

impl BenchmarkRow {
    fn key(&self) -> (u64, Mechanism, Algorithm, usize) {
        (self.rate.to_bits(), self.mechanism, self.algorithm, self.replicate)
    }
}

/// Complete data for replicate `r`, with labels when the source has them.
pub fn replicate_data(plan: &BenchmarkPlan, r: usize) -> Result<(Array2<f64>, Option<Vec<usize>>)> {
    let seed = data_seed(plan.master_seed, r);
    match &plan.source {
        DataSource::Mixture(spec) => {
            let (x, labels) = gen_gaussian_mixture(&MixtureSpec { seed, ..*spec })?;
            Ok((x, Some(labels)))
        }
        DataSource::Perturbed(base) => Ok((perturb_dataset(base.view(), seed)?, None)),
    }
}

fn run_on(
    plan: &BenchmarkPlan,
    x: &Array2<f64>,
    labels: Option<&[usize]>,
    rate: f64,
    mechanism: Mechanism,
    algorithm: Algorithm,
    r: usize,
) -> BenchmarkRow {
    let seed = cell_seed(plan.master_seed, rate, mechanism, algorithm, r);
    let outcome = (|| {
        let spec = AmputationSpec {
            rate,
            mechanism,
            seed: amputation_seed(plan.master_seed, rate, mechanism, r),
        };
        let (data, truth) = ampute(x.view(), &spec)?;
        let out = run_method(algorithm, &data, &plan.method, seed)?;
        evaluate(&data, out.codebook.as_ref(), &out.imputations, Some(&truth), labels, out.wall_time)
    })();
    let (metrics, error) = match outcome {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e.to_string())),
    };
    BenchmarkRow {
        rate,
        mechanism,
        algorithm,
        replicate: r,
        seed,
        metrics,
        error,
    }
}

/// Runs a single cell from scratch.
pub fn run_cell(plan: &BenchmarkPlan, rate: f64, mechanism: Mechanism, algorithm: Algorithm, r: usize) -> Result<BenchmarkRow> {
    let (x, labels) = replicate_data(plan, r)?;
    Ok(run_on(plan, &x, labels.as_deref(), rate, mechanism, algorithm, r))
}

/// Runs the whole plan. Failing cells become rows with an error message; the
/// result is sorted by (rate, mechanism, algorithm, replicate).
pub fn run_benchmark(plan: &BenchmarkPlan) -> Result<Vec<BenchmarkRow>> {
    plan.validate()?;
    let mut cells = Vec::new();
    for &rate in &plan.rates {
        for &mechanism in &plan.mechanisms {
            for &algorithm in &plan.algorithms {
                cells.push((rate, mechanism, algorithm));
            }
        }
    }
    let mut rows = Vec::with_capacity(cells.len() * plan.replicates);
    for r in 0..plan.replicates {
        let (x, labels) = replicate_data(plan, r)?;
        let run = |&(rate, mechanism, algorithm): &(f64, Mechanism, Algorithm)| {
            log::debug!("replicate {r}: {algorithm} at {rate} {mechanism}");
            run_on(plan, &x, labels.as_deref(), rate, mechanism, algorithm, r)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            rows.extend(cells.par_iter().map(run).collect::<Vec<_>>());
        }
        #[cfg(not(feature = "parallel"))]
        rows.extend(cells.iter().map(run));
    }
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(rows)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean,
            sd,
            count: values.len(),
        })
    }
}

impl std::fmt::Display for Stat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ({:.3})", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub rate: f64,
    pub mechanism: Mechanism,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub failures: usize,
    pub quantization: Option<Stat>,
    pub topographic: Option<Stat>,
    pub imputation_rmse: Option<Stat>,
    pub ari: Option<Stat>,
    pub ari_merged: Option<Stat>,
    pub wall_time_s: Option<Stat>,
}

/// Per-cell mean and sd over successful replicates, in cell-key order.
pub fn summarize(rows: &[BenchmarkRow]) -> Vec<CellSummary> {
    let mut sorted: Vec<&BenchmarkRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.key().cmp(&b.key()));
    let mut out = Vec::new();
    for group in sorted.chunk_by(|a, b| a.key().0 == b.key().0 && a.mechanism == b.mechanism && a.algorithm == b.algorithm) {
        let ok: Vec<&MetricsReport> = group.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let stat = |f: fn(&MetricsReport) -> Option<f64>| Stat::of(&ok.iter().filter_map(|m| f(m)).collect::<Vec<_>>());
        let first = group[0];
        out.push(CellSummary {
            rate: first.rate,
            mechanism: first.mechanism,
            algorithm: first.algorithm,
            runs: group.len(),
            failures: group.len() - ok.len(),
            quantization: stat(|m| m.quantization),
            topographic: stat(|m| m.topographic),
            imputation_rmse: stat(|m| m.imputation_rmse),
            ari: stat(|m| m.ari),
            ari_merged: stat(|m| m.ari_merged),
            wall_time_s: stat(|m| Some(m.wall_time)),
        });
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Results table: one CSV line per cell, failures carry the error text.
pub fn write_rows<W: std::io::Write>(writer: W, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "rate", "mechanism", "algorithm", "replicate", "seed", "status", "quantization", "topographic",
        "imputation_rmse", "ari", "ari_merged", "wall_time_s", "error",
    ])?;
    for r in rows {
        let m = r.metrics.clone().unwrap_or_default();
        let status = if r.metrics.is_some() { "ok" } else { "failed" };
        w.write_record([
            r.rate.to_string(),
            r.mechanism.to_string(),
            r.algorithm.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            status.to_string(),
            opt(m.quantization),
            opt(m.topographic),
            opt(m.imputation_rmse),
            opt(m.ari),
            opt(m.ari_merged),
            if r.metrics.is_some() { m.wall_time.to_string() } else { String::new() },
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary as text in a "mean (sd)" layout.
pub fn format_summary(summary: &[CellSummary]) -> String {
    let cell = |s: &Option<Stat>| s.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
    let mut out = format!(
        "{:<6} {:<5} {:<14} {:>4} {:>4} {:>15} {:>15} {:>15} {:>15} {:>15} {:>15}\n",
        "rate", "mech", "algorithm", "runs", "fail", "topographic", "quantization", "rmse", "ari", "ari_merged", "time_s"
    );
    for s in summary {
        out.push_str(&format!(
            "{:<6} {:<5} {:<14} {:>4} {:>4} {:>15} {:>15} {:>15} {:>15} {:>15} {:>15}\n",
            s.rate,
            s.mechanism.to_string(),
            s.algorithm.to_string(),
            s.runs,
            s.failures,
            cell(&s.topographic),
            cell(&s.quantization),
            cell(&s.imputation_rmse),
            cell(&s.ari),
            cell(&s.ari_merged),
            cell(&s.wall_time_s),
        ));
    }
    out
}
