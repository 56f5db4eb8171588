//! Joint map learning and imputation.
//!
//! [`misssom_basic`] alternates complete Kohonen runs on the augmented data
//! with closed-form imputation at the final radius. [`misssom_accelerated`]
//! runs the Kohonen passes once and refreshes the imputations after every
//! epoch at the current radius.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use web_time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::masked::{impute_with_table, Imputation, ImputationSet, MaskedDataset};
use crate::som::{
    epoch_order, init_codebook_with, nearest, pull_all, rng_for, Codebook, TrainingSchedule,
    VisitOrder,
};
use crate::topology::{GridSpec, NeighborhoodTable};

/// Outer-loop stopping tolerance on the largest change of an imputed value.
pub const BASIC_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_OUTER_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    #[default]
    Mean,
    Median,
}

impl std::str::FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            other => Err(Error::Domain(format!("unknown initialization '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissSomResult {
    pub codebook: Codebook,
    pub imputations: ImputationSet,
    /// Observed entries merged with the final imputations.
    pub completed: Array2<f64>,
    /// Total number of passes through the data.
    pub epochs_run: usize,
    /// Outer iterations of the basic variant; 1 for the accelerated one.
    pub outer_iterations: usize,
    pub wall_time: Duration,
}

fn column_statistic(values: &mut [f64], strategy: InitStrategy) -> f64 {
    match strategy {
        InitStrategy::Mean => values.iter().sum::<f64>() / values.len() as f64,
        InitStrategy::Median => {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            }
        }
    }
}

/// Column mean or median over observed entries, for every masked position.
pub fn init_imputations(data: &MaskedDataset, strategy: InitStrategy) -> Result<ImputationSet> {
    if !data.has_missing() {
        return Ok(ImputationSet::default());
    }
    data.check_columns()?;
    let stats: Vec<f64> = (0..data.p())
        .map(|j| {
            let mut observed: Vec<f64> = (0..data.n())
                .filter(|&i| data.is_observed(i, j))
                .map(|i| data.values()[[i, j]])
                .collect();
            column_statistic(&mut observed, strategy)
        })
        .collect();
    Ok(ImputationSet::from_sorted(
        data.missing_positions()
            .map(|(row, col)| Imputation {
                row,
                col,
                value: stats[col],
            })
            .collect(),
    ))
}

/// Basic alternating algorithm with column-mean initialization.
pub fn misssom_basic(
    data: &MaskedDataset,
    grid: &GridSpec,
    schedule: &TrainingSchedule,
    outer_iters: usize,
) -> Result<MissSomResult> {
    misssom_basic_with(data, grid, schedule, outer_iters, InitStrategy::Mean)
}

pub fn misssom_basic_with(
    data: &MaskedDataset,
    grid: &GridSpec,
    schedule: &TrainingSchedule,
    outer_iters: usize,
    init: InitStrategy,
) -> Result<MissSomResult> {
    schedule.validate()?;
    if outer_iters == 0 {
        return Err(Error::Domain("outer iteration count must be positive".into()));
    }
    let start = Instant::now();
    let mut imputations = init_imputations(data, init)?;
    let mut aug = data.with_imputations(&imputations)?;
    let mut rng = rng_for(schedule.seed);
    let mut codebook = init_codebook_with(aug.values().view(), grid, &mut rng)?;
    let distances = grid.distance_matrix();
    let final_table = NeighborhoodTable::new(&distances, grid.len(), schedule.radius_end)?;
    let p = data.p();
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut outer = 0;
    while outer < outer_iters {
        outer += 1;
        // full Kohonen run on the augmented data, warm-started
        for t in 1..=schedule.epochs {
            let table = NeighborhoodTable::new(&distances, grid.len(), schedule.radius_at(t))?;
            let rate = schedule.rate_at(t);
            epoch_order(&mut order, VisitOrder::Shuffled, &mut rng);
            let flat = codebook.flat_mut();
            for &i in &order {
                let x = aug.row(i);
                let ell = nearest(x, Some(aug.mask_row(i)), flat, p);
                pull_all(flat, p, x, rate, table.row(ell));
            }
        }
        let next = impute_with_table(&aug, &codebook, &final_table);
        let change = next.max_abs_change(&imputations);
        aug.fill(&next);
        imputations = next;
        if change < BASIC_TOLERANCE {
            break;
        }
    }
    Ok(MissSomResult {
        completed: aug.values().clone(),
        codebook,
        imputations,
        epochs_run: outer * schedule.epochs,
        outer_iterations: outer,
        wall_time: start.elapsed(),
    })
}

/// Accelerated algorithm: rows visited in order, imputations refreshed once
/// per epoch, column-mean initialization.
pub fn misssom_accelerated(
    data: &MaskedDataset,
    grid: &GridSpec,
    schedule: &TrainingSchedule,
) -> Result<MissSomResult> {
    misssom_accelerated_with(data, grid, schedule, VisitOrder::Sequential, InitStrategy::Mean)
}

pub fn misssom_accelerated_with(
    data: &MaskedDataset,
    grid: &GridSpec,
    schedule: &TrainingSchedule,
    visit: VisitOrder,
    init: InitStrategy,
) -> Result<MissSomResult> {
    schedule.validate()?;
    let start = Instant::now();
    let mut imputations = init_imputations(data, init)?;
    let mut aug = data.with_imputations(&imputations)?;
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
            let x = aug.row(i);
            let ell = nearest(x, Some(aug.mask_row(i)), flat, p);
            pull_all(flat, p, x, rate, table.row(ell));
        }
        imputations = impute_with_table(&aug, &codebook, &table);
        aug.fill(&imputations);
    }
    Ok(MissSomResult {
        completed: aug.values().clone(),
        codebook,
        imputations,
        epochs_run: schedule.epochs,
        outer_iterations: 1,
        wall_time: start.elapsed(),
    })
}
