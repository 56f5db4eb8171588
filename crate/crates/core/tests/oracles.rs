mod common;

use approx::assert_abs_diff_eq;
use missom::baselines::knn_impute;
use missom::som::train_som_with;
use missom::*;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

fn two_clouds(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((2 * n, 2), |(i, j)| {
        let centre = if i < n { -5.0 } else { 5.0 };
        let e: f64 = StandardNormal.sample(&mut rng);
        if j == 0 { centre + 0.3 * e } else { 0.3 * e }
    })
}

// Fixed point of the batch map: w_k = sum_i V(k, h_i) x_i / sum_i V(k, h_i).
fn batch_fixed_point(x: &Array2<f64>, grid: &GridSpec, radius: f64, start: Codebook) -> Codebook {
    let mut cb = start;
    for _ in 0..200 {
        let k_len = cb.len();
        let mut num = Array2::<f64>::zeros((k_len, x.ncols()));
        let mut den = vec![0.0; k_len];
        for row in x.rows() {
            let h = winner(row.as_slice().unwrap(), &cb).unwrap();
            for k in 0..k_len {
                let v = grid.neighborhood_weight(k, h, radius).unwrap();
                den[k] += v;
                for j in 0..x.ncols() {
                    num[[k, j]] += v * row[j];
                }
            }
        }
        for k in 0..k_len {
            for j in 0..x.ncols() {
                num[[k, j]] /= den[k];
            }
        }
        cb = Codebook::new(*grid, num).unwrap();
    }
    cb
}

#[test]
fn two_neuron_map_matches_batch_oracle() {
    let x = two_clouds(200, 3);
    let grid = GridSpec::rectangular(1, 2).unwrap();
    let schedule = TrainingSchedule::for_grid(&grid, 11)
        .with_epochs(200)
        .with_radius(0.5, 0.5)
        .with_rate(0.02, 0.0005);
    let online = train_som_with(x.view(), &grid, &schedule, VisitOrder::Shuffled).unwrap();
    let oracle = batch_fixed_point(&x, &grid, 0.5, online.clone());
    // neighbor pull exp(-2) shrinks the two prototypes toward each other
    let v = (-2.0f64).exp();
    let shrunk = 5.0 * (1.0 - v) / (1.0 + v);
    assert_abs_diff_eq!(oracle.prototype(0)[0].abs(), shrunk, epsilon = 0.1);
    for k in 0..2 {
        for j in 0..2 {
            assert_abs_diff_eq!(online.prototype(k)[j], oracle.prototype(k)[j], epsilon = 0.1);
        }
    }
    // at a tiny radius the map reduces to 2-means
    let schedule = schedule.with_radius(0.05, 0.05);
    let online = train_som_with(x.view(), &grid, &schedule, VisitOrder::Shuffled).unwrap();
    let mut xs: Vec<f64> = (0..2).map(|k| online.prototype(k)[0]).collect();
    xs.sort_by(f64::total_cmp);
    let left = x.slice(ndarray::s![..200, 0]).mean().unwrap();
    let right = x.slice(ndarray::s![200.., 0]).mean().unwrap();
    assert_abs_diff_eq!(xs[0], left, epsilon = 0.05);
    assert_abs_diff_eq!(xs[1], right, epsilon = 0.05);
}

#[test]
fn imputation_update_is_the_minimizer() {
    let report = common::imputation_optimality(60, 100, 42);
    assert_eq!(report.instances, 60);
    assert!(report.max_coordinate_gap < 1e-6, "{report:?}");
    assert_eq!(report.perturbation_wins, report.perturbations);
}

#[test]
fn loss_splits_into_observed_and_missing_parts() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (n, p) = (rng.random_range(2..12), rng.random_range(1..4));
        let values = Array2::from_shape_fn((n, p), |_| rng.random_range(-3.0..3.0));
        let mut mask = Array2::from_shape_fn((n, p), |_| rng.random_bool(0.7));
        for i in 0..n {
            mask[[i, 0]] = true;
        }
        let data = MaskedDataset::new(values, mask).unwrap();
        let grid = GridSpec::hexagonal(2, 2).unwrap();
        let cb = Codebook::new(grid, Array2::from_shape_fn((4, p), |_| rng.random_range(-3.0..3.0))).unwrap();
        let imp = impute_update(&data, &cb, 1.3).unwrap();
        let parts = missom_loss(&data, &imp, &cb, 1.3).unwrap();
        assert_abs_diff_eq!(parts.total, parts.observed + parts.missing, epsilon = 1e-12 * (1.0 + parts.total));
    }
}

// Direct transcription of the donor rule, used as an independent oracle.
fn knn_brute(data: &MaskedDataset, k: usize) -> Vec<((usize, usize), f64)> {
    let (n, p) = (data.n(), data.p());
    let mut out = Vec::new();
    for (i, j) in data.missing_positions() {
        let mut donors: Vec<(f64, usize)> = (0..n)
            .filter(|&r| r != i && data.is_observed(r, j))
            .filter_map(|r| {
                let shared: Vec<usize> = (0..p).filter(|&c| data.is_observed(i, c) && data.is_observed(r, c)).collect();
                if shared.is_empty() {
                    return None;
                }
                let s: f64 = shared.iter().map(|&c| (data.values()[[i, c]] - data.values()[[r, c]]).powi(2)).sum();
                Some(((p as f64 / shared.len() as f64 * s).sqrt(), r))
            })
            .collect();
        donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        donors.truncate(k);
        let value = if donors.is_empty() {
            let obs: Vec<f64> = (0..n).filter(|&r| data.is_observed(r, j)).map(|r| data.values()[[r, j]]).collect();
            obs.iter().sum::<f64>() / obs.len() as f64
        } else {
            let wsum: f64 = donors.iter().map(|(d, _)| 1.0 / (d + 1e-12)).sum();
            donors.iter().map(|(d, r)| data.values()[[*r, j]] / (d + 1e-12)).sum::<f64>() / wsum
        };
        out.push(((i, j), value));
    }
    out
}

#[test]
fn knn_matches_brute_force() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let (n, p) = (rng.random_range(3..15), rng.random_range(2..5));
        let values = Array2::from_shape_fn((n, p), |_| rng.random_range(-3.0..3.0));
        let mut mask = Array2::from_shape_fn((n, p), |_| rng.random_bool(0.6));
        for i in 0..n {
            mask[[i, rng.random_range(0..p)]] = true;
        }
        let Ok(data) = MaskedDataset::new(values, mask) else { continue };
        if data.check_columns().is_err() {
            continue;
        }
        let k = rng.random_range(1..5);
        let got = knn_impute(&data, k).unwrap();
        for ((i, j), v) in knn_brute(&data, k) {
            assert_abs_diff_eq!(got.imputations.get(i, j).unwrap(), v, epsilon = 1e-9);
        }
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn mixture_has_the_requested_within_group_correlation() {
    let (x, labels) = gen_gaussian_mixture(&MixtureSpec { seed: 4, ..Default::default() }).unwrap();
    for g in 0..4 {
        let rows: Vec<usize> = (0..x.nrows()).filter(|&i| labels[i] == g).collect();
        assert_eq!(rows.len(), 500);
        let sub = x.select(ndarray::Axis(0), &rows);
        for a in 0..5 {
            let ca = sub.column(a).to_vec();
            let sd = (ca.iter().map(|v| v * v).sum::<f64>() / 500.0 - (ca.iter().sum::<f64>() / 500.0).powi(2)).sqrt();
            assert_abs_diff_eq!(sd, 1.0, epsilon = 0.1);
            for b in (a + 1)..5 {
                assert_abs_diff_eq!(pearson(&ca, &sub.column(b).to_vec()), 0.5, epsilon = 0.07);
            }
        }
    }
}

#[test]
fn mar_masking_depends_on_other_columns() {
    let (x, _) = gen_gaussian_mixture(&MixtureSpec { seed: 6, ..Default::default() }).unwrap();
    let (data, _) = ampute(x.view(), &AmputationSpec { rate: 0.2, mechanism: Mechanism::Mar, seed: 2 }).unwrap();
    for j in 0..5 {
        let masked: Vec<f64> = (0..2000).map(|i| if data.is_observed(i, j) { 0.0 } else { 1.0 }).collect();
        let rate = masked.iter().sum::<f64>() / 2000.0;
        assert_abs_diff_eq!(rate, 0.2, epsilon = 0.02);
        // point-biserial correlation with the sum of the other columns
        let others: Vec<f64> = (0..2000).map(|i| (0..5).filter(|&c| c != j).map(|c| x[[i, c]]).sum()).collect();
        let r = pearson(&masked, &others);
        // 4 standard errors under independence
        assert!(r.abs() > 4.0 / 2000f64.sqrt(), "column {j}: r = {r}");
    }
    let (mcar, _) = ampute(x.view(), &AmputationSpec { rate: 0.2, mechanism: Mechanism::Mcar, seed: 2 }).unwrap();
    let frac = mcar.missing_count() as f64 / 10000.0;
    assert_abs_diff_eq!(frac, 0.2, epsilon = 0.01);
}

#[test]
fn kohonen_step_by_hand() {
    let grid = GridSpec::rectangular(1, 2).unwrap();
    let cb = Codebook::new(grid, array![[0.0, 0.0], [2.0, 2.0]]).unwrap();
    let next = kohonen_update(&[1.0, 0.0], &cb, 0.5, 1.0).unwrap();
    let v = (-0.5f64).exp();
    assert_abs_diff_eq!(next.prototype(0)[0], 0.5);
    assert_abs_diff_eq!(next.prototype(1)[0], 2.0 + 0.5 * v * (1.0 - 2.0), epsilon = 1e-15);
    assert_abs_diff_eq!(next.prototype(1)[1], 2.0 - 0.5 * v * 2.0, epsilon = 1e-15);
}
