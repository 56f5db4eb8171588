//! Randomized invariant checks shared by the property-test target and the
//! acceptance runner.

#![allow(dead_code)]

use missom::baselines::{cottrell_som, knn_impute};
use missom::bench::{run_cell, Algorithm, BenchmarkPlan, DataSource, MethodConfig};
use missom::misssom::{misssom_accelerated, misssom_basic};
use missom::som::train_som_with;
use missom::*;
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

/// A small partially observed dataset and a grid to train on.
#[derive(Debug, Clone)]
pub struct Case {
    pub data: MaskedDataset,
    pub grid: GridSpec,
    pub seed: u64,
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    (2usize..14, 1usize..4, 1usize..3, 2usize..4, any::<bool>(), any::<u64>())
        .prop_flat_map(|(n, p, rows, cols, hex, seed)| {
            let values = proptest::collection::vec(-20.0f64..20.0, n * p);
            let mask = proptest::collection::vec(proptest::bool::weighted(0.7), n * p);
            let keep = proptest::collection::vec(0..p, n);
            (Just((n, p, rows, cols, hex, seed)), values, mask, keep)
        })
        .prop_filter_map("every column needs an observed entry", |((n, p, rows, cols, hex, seed), v, m, keep)| {
            let values = Array2::from_shape_vec((n, p), v).ok()?;
            let mut mask = Array2::from_shape_vec((n, p), m).ok()?;
            for (i, &j) in keep.iter().enumerate() {
                mask[[i, j]] = true;
            }
            let data = MaskedDataset::new(values, mask).ok()?;
            data.check_columns().ok()?;
            let topology = if hex { Topology::Hexagonal } else { Topology::Rectangular };
            Some(Case {
                data,
                grid: GridSpec::new(rows, cols, topology).ok()?,
                seed,
            })
        })
}

fn schedule(case: &Case) -> TrainingSchedule {
    TrainingSchedule::for_grid(&case.grid, case.seed).with_epochs(6)
}

fn codebook_for(case: &Case, w: &[f64]) -> Codebook {
    let (k, p) = (case.grid.len(), case.data.p());
    let weights = Array2::from_shape_fn((k, p), |(a, b)| w[(a * p + b) % w.len()]);
    Codebook::new(case.grid, weights).unwrap()
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

/// Overwrites every masked entry with junk.
fn scramble(data: &MaskedDataset, junk: f64) -> MaskedDataset {
    let mut v = data.values().clone();
    for (i, j) in data.missing_positions() {
        v[[i, j]] = junk + (i * 31 + j * 7) as f64;
    }
    MaskedDataset::new(v, data.mask().clone()).unwrap()
}

/// Masked winners and observed-entry metrics ignore the values stored at
/// masked positions.
pub fn mask_ignorance(runner: &mut TestRunner) -> std::result::Result<(), String> {
    let strat = (case_strategy(), proptest::collection::vec(-20.0f64..20.0, 1..30), -1e6f64..1e6);
    runner
        .run(&strat, |(case, w, junk)| {
            let cb = codebook_for(&case, &w);
            let other = scramble(&case.data, junk);
            for i in 0..case.data.n() {
                let a = masked_winner(case.data.row(i), case.data.mask_row(i), &cb).unwrap();
                let b = masked_winner(other.row(i), other.mask_row(i), &cb).unwrap();
                prop_assert_eq!(a, b);
                if cb.len() >= 2 {
                    let a = second_masked_winner(case.data.row(i), case.data.mask_row(i), &cb).unwrap();
                    let b = second_masked_winner(other.row(i), other.mask_row(i), &cb).unwrap();
                    prop_assert_eq!(a, b);
                }
            }
            prop_assert_eq!(quantization_error(&case.data, &cb).unwrap(), quantization_error(&other, &cb).unwrap());
            if cb.len() >= 2 {
                prop_assert_eq!(topographic_error(&case.data, &cb).unwrap(), topographic_error(&other, &cb).unwrap());
            }
            // the trained map does not depend on the placeholders either
            let s = schedule(&case);
            prop_assert_eq!(
                misssom_accelerated(&case.data, &case.grid, &s).unwrap().codebook,
                misssom_accelerated(&other, &case.grid, &s).unwrap().codebook
            );
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by the monotone chain, counter-clockwise.
fn hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn in_hull(h: &[[f64; 2]], q: [f64; 2], tol: f64) -> bool {
    match h.len() {
        0 => false,
        1 => (h[0][0] - q[0]).abs() <= tol && (h[0][1] - q[1]).abs() <= tol,
        2 => {
            let (a, b) = (h[0], h[1]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let t = ((q[0] - a[0]) * (b[0] - a[0]) + (q[1] - a[1]) * (b[1] - a[1])) / (len * len);
            t >= -tol && t <= 1.0 + tol && cross(a, b, q).abs() / len <= tol
        }
        _ => (0..h.len()).all(|i| {
            let (a, b) = (h[i], h[(i + 1) % h.len()]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cross(a, b, q) / len >= -tol
        }),
    }
}

/// Prototypes trained on complete data stay inside the convex hull of the
/// data (exactly in 2-D, as a bounding box otherwise).
pub fn convex_hull(runner: &mut TestRunner) -> std::result::Result<(), String> {
    runner
        .run(&(case_strategy(), any::<bool>()), |(case, shuffled)| {
            let x = case.data.values();
            let visit = if shuffled { VisitOrder::Shuffled } else { VisitOrder::Sequential };
            let cb = train_som_with(x.view(), &case.grid, &schedule(&case), visit).unwrap();
            let tol = 1e-9 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            if x.ncols() == 2 {
                let h = hull(x.rows().into_iter().map(|r| [r[0], r[1]]).collect());
                for k in 0..cb.len() {
                    let w = cb.prototype(k);
                    prop_assert!(in_hull(&h, [w[0], w[1]], tol), "prototype {:?} outside hull {:?}", w, h);
                }
            }
            for (j, col) in x.columns().into_iter().enumerate() {
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for k in 0..cb.len() {
                    let v = cb.prototype(k)[j];
                    prop_assert!(v >= lo - tol && v <= hi + tol);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn observed_range(data: &MaskedDataset, j: usize) -> (f64, f64) {
    (0..data.n())
        .filter(|&i| data.is_observed(i, j))
        .map(|i| data.values()[[i, j]])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Imputed values and prototypes of missing-data methods stay within the
/// observed range of their column.
pub fn range_confinement(runner: &mut TestRunner) -> std::result::Result<(), String> {
    runner
        .run(&case_strategy(), |case| {
            let s = schedule(&case);
            let d = &case.data;
            let acc = misssom_accelerated(d, &case.grid, &s).unwrap();
            let basic = misssom_basic(d, &case.grid, &s, 2).unwrap();
            let cot = cottrell_som(d, &case.grid, &s).unwrap();
            let knn = knn_impute(d, 3).unwrap();
            let tol = 1e-9 * (1.0 + d.values().iter().fold(0.0f64, |m, v| m.max(v.abs())));
            for set in [&acc.imputations, &basic.imputations, &cot.imputations, &knn.imputations] {
                for e in set {
                    let (lo, hi) = observed_range(d, e.col);
                    prop_assert!(e.value >= lo - tol && e.value <= hi + tol, "{:?} outside [{}, {}]", e, lo, hi);
                }
            }
            for cb in [&acc.codebook, &basic.codebook] {
                for j in 0..d.p() {
                    let (lo, hi) = observed_range(d, j);
                    for k in 0..cb.len() {
                        let v = cb.prototype(k)[j];
                        prop_assert!(v >= lo - tol && v <= hi + tol);
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Completed matrices keep every observed entry and imputations cover the
/// masked positions exactly.
pub fn observed_preservation(runner: &mut TestRunner) -> std::result::Result<(), String> {
    runner
        .run(&case_strategy(), |case| {
            let s = schedule(&case);
            let d = &case.data;
            let acc = misssom_accelerated(d, &case.grid, &s).unwrap();
            let cot = cottrell_som(d, &case.grid, &s).unwrap();
            let mean = mean_impute(d).unwrap();
            let knn = knn_impute(d, 2).unwrap();
            let outputs = [
                (&acc.imputations, &acc.completed),
                (&cot.imputations, &cot.completed),
                (&mean.imputations, &mean.completed),
                (&knn.imputations, &knn.completed),
            ];
            for (imp, completed) in outputs {
                prop_assert!(imp.covers(d));
                for i in 0..d.n() {
                    for j in 0..d.p() {
                        if d.is_observed(i, j) {
                            prop_assert_eq!(completed[[i, j]], d.values()[[i, j]]);
                        } else {
                            prop_assert_eq!(Some(completed[[i, j]]), imp.get(i, j));
                        }
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every seeded operation returns identical output for identical inputs.
pub fn determinism(runner: &mut TestRunner) -> std::result::Result<(), String> {
    let strat = (case_strategy(), 0.0f64..0.5, 0usize..3);
    runner
        .run(&strat, |(case, rate, mech)| {
            let s = schedule(&case);
            let d = &case.data;
            let x = d.values();
            let mechanism = Mechanism::ALL[mech];
            let twice = |f: &dyn Fn() -> String| (f(), f());
            let checks: Vec<(&str, (String, String))> = vec![
                ("init_codebook", twice(&|| format!("{:?}", init_codebook(x.view(), &case.grid, case.seed).unwrap()))),
                ("train_som", twice(&|| format!("{:?}", train_som(x.view(), &case.grid, &s).unwrap()))),
                ("misssom_accelerated", twice(&|| {
                    let r = misssom_accelerated(d, &case.grid, &s).unwrap();
                    format!("{:?}{:?}", r.codebook, r.imputations)
                })),
                ("misssom_basic", twice(&|| {
                    let r = misssom_basic(d, &case.grid, &s, 2).unwrap();
                    format!("{:?}{:?}", r.codebook, r.imputations)
                })),
                ("cottrell", twice(&|| {
                    let r = cottrell_som(d, &case.grid, &s).unwrap();
                    format!("{:?}{:?}", r.codebook, r.imputations)
                })),
                ("perturb", twice(&|| format!("{:?}", perturb_dataset(x.view(), case.seed).unwrap()))),
                ("ampute", twice(&|| {
                    let spec = AmputationSpec { rate, mechanism, seed: case.seed };
                    format!("{:?}", ampute(x.view(), &spec).ok())
                })),
                ("mixture", twice(&|| {
                    let spec = MixtureSpec { n: 3 + d.n(), p: 1 + d.p(), groups: 2, seed: case.seed, ..Default::default() };
                    format!("{:?}", gen_gaussian_mixture(&spec).unwrap())
                })),
            ];
            for (name, (a, b)) in checks {
                prop_assert!(a == b, "{} is not deterministic", name);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// A single benchmark cell rerun with the same plan gives the same row.
pub fn benchmark_cell_determinism(runner: &mut TestRunner) -> std::result::Result<(), String> {
    runner
        .run(&(any::<u64>(), 0usize..3, 0usize..2), |(seed, mech, r)| {
            let grid = GridSpec::hexagonal(2, 3).unwrap();
            let mut method = MethodConfig::new(grid);
            method.schedule = method.schedule.with_epochs(3);
            let plan = BenchmarkPlan {
                replicates: 2,
                rates: vec![0.2],
                mechanisms: vec![Mechanism::ALL[mech]],
                algorithms: vec![Algorithm::MissSom],
                master_seed: seed,
                source: DataSource::Mixture(MixtureSpec { n: 30, ..Default::default() }),
                method,
            };
            let strip = |mut row: missom::bench::BenchmarkRow| {
                if let Some(m) = row.metrics.as_mut() {
                    m.wall_time = 0.0;
                }
                row
            };
            let a = strip(run_cell(&plan, 0.2, Mechanism::ALL[mech], Algorithm::MissSom, r).unwrap());
            let b = strip(run_cell(&plan, 0.2, Mechanism::ALL[mech], Algorithm::MissSom, r).unwrap());
            prop_assert_eq!(a, b);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub type Property = fn(&mut TestRunner) -> std::result::Result<(), String>;

pub const PROPERTIES: [(&str, Property); 6] = [
    ("mask ignorance", mask_ignorance),
    ("convex hull confinement", convex_hull),
    ("imputed range confinement", range_confinement),
    ("observed-entry preservation", observed_preservation),
    ("determinism of seeded operations", determinism),
    ("benchmark cell determinism", benchmark_cell_determinism),
];

/// Deterministic runner so failures reproduce.
pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Summary of the imputation-optimality oracle.
#[derive(Debug, Default)]
pub struct OptimalityReport {
    pub instances: usize,
    pub max_coordinate_gap: f64,
    pub perturbations: usize,
    pub perturbation_wins: usize,
}

/// Random small instances; for each, every imputed coordinate is compared to
/// a golden-section minimizer of its own term of the imputed loss, and the
/// whole imputation is compared to `perturbations` random alternatives.
pub fn imputation_optimality(instances: usize, perturbations: usize, seed: u64) -> OptimalityReport {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = OptimalityReport::default();
    while report.instances < instances {
        let n = rng.random_range(2..=20);
        let p = rng.random_range(1..=3);
        let (rows, cols) = loop {
            let r = rng.random_range(1..=3);
            let c = rng.random_range(1..=3);
            if (2..=6).contains(&(r * c)) {
                break (r, c);
            }
        };
        let grid = GridSpec::new(rows, cols, if rng.random_bool(0.5) { Topology::Hexagonal } else { Topology::Rectangular }).unwrap();
        let values = Array2::from_shape_fn((n, p), |_| rng.random_range(-5.0..5.0));
        let mut mask = Array2::from_shape_fn((n, p), |_| rng.random_bool(0.6));
        for i in 0..n {
            let j = rng.random_range(0..p);
            mask[[i, j]] = true;
        }
        let Ok(data) = MaskedDataset::new(values, mask) else { continue };
        if !data.has_missing() {
            continue;
        }
        let cb = Codebook::new(grid, Array2::from_shape_fn((grid.len(), p), |_| rng.random_range(-5.0..5.0))).unwrap();
        let radius = rng.random_range(0.3..3.0);
        let imp = impute_update(&data, &cb, radius).unwrap();

        for e in &imp {
            let ell = masked_winner(data.row(e.row), data.mask_row(e.row), &cb).unwrap();
            let term = |v: f64| {
                (0..cb.len())
                    .map(|k| grid.neighborhood_weight(k, ell, radius).unwrap() * (v - cb.prototype(k)[e.col]).powi(2))
                    .sum::<f64>()
            };
            let best = golden_section(term, -6.0, 6.0, 1e-10);
            report.max_coordinate_gap = report.max_coordinate_gap.max((best - e.value).abs());
        }

        let base = missom_loss(&data, &imp, &cb, radius).unwrap();
        for _ in 0..perturbations {
            let moved: Vec<Imputation> = imp
                .iter()
                .map(|e| Imputation { value: e.value + rng.random_range(-1.0..1.0), ..*e })
                .collect();
            let alt = missom_loss(&data, &ImputationSet::new(moved).unwrap(), &cb, radius).unwrap();
            report.perturbations += 1;
            if alt.missing >= base.missing && alt.total >= base.total - 1e-12 {
                report.perturbation_wins += 1;
            }
        }
        report.instances += 1;
    }
    report
}
