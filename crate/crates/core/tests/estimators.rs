mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use missforecast::estimators::{em_mvn, irls_logistic, ols, EmOptions, IrlsOptions};
use missforecast::MaskedMatrix;

#[test]
fn ols_matches_normal_equations() {
    for seed in 0..10 {
        let mut r = common::rng(seed);
        let n = 40 + 5 * seed as usize;
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { r.random_range(-5.0..5.0) });
        let y = DVector::from_fn(n, |i, _| 2.0 + x[(i, 1)] * 0.3 + r.random_range(-1.0..1.0));
        let fit = ols(&x, &y).unwrap();
        let reference = common::lstsq_normal(&x, &y);
        for (a, b) in fit.coef.iter().zip(reference.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let resid = &y - &x * DVector::from_vec(fit.coef.clone());
        let s2 = resid.norm_squared() / (n - 3) as f64;
        assert!((fit.resid_var - s2).abs() < 1e-10 * s2.max(1.0));
    }
}

#[test]
fn ols_rejects_collinear_design() {
    let x = DMatrix::from_fn(10, 3, |i, j| match j {
        0 => 1.0,
        1 => i as f64,
        _ => 2.0 * i as f64,
    });
    let y = DVector::from_fn(10, |i, _| i as f64);
    assert!(ols(&x, &y).is_err());
}

#[test]
fn em_loglik_matches_row_by_row_evaluation() {
    for seed in 0..20 {
        let data = common::fuzzed_matrix(seed, 80, 3, 0.35);
        let fit = em_mvn(&data, EmOptions::default()).unwrap();
        let reference = common::observed_loglik(&data, &fit.joint.mean, &fit.joint.cov_mat());
        assert!((fit.loglik - reference).abs() < 1e-8, "seed {seed}: {} vs {reference}", fit.loglik);
    }
}

#[test]
fn em_trace_never_decreases() {
    for seed in 100..150 {
        let data = common::fuzzed_matrix(seed, 50, 4, 0.4);
        let fit = em_mvn(&data, EmOptions::default()).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "seed {seed}: {} then {}", w[0], w[1]);
        }
    }
}

#[test]
fn em_on_complete_data_is_the_sample_moments() {
    let mut r = common::rng(9);
    let rows: Vec<Vec<Option<f64>>> =
        (0..200).map(|_| (0..3).map(|_| Some(r.random_range(-1.0..1.0))).collect()).collect();
    let data = MaskedMatrix::from_rows(&rows).unwrap();
    let fit = em_mvn(&data, EmOptions::default()).unwrap();
    let n = rows.len() as f64;
    for j in 0..3 {
        let m: f64 = rows.iter().map(|row| row[j].unwrap()).sum::<f64>() / n;
        assert!((fit.joint.mean[j] - m).abs() < 1e-10);
        for k in 0..3 {
            let mk: f64 = rows.iter().map(|row| row[k].unwrap()).sum::<f64>() / n;
            let c: f64 = rows.iter().map(|row| (row[j].unwrap() - m) * (row[k].unwrap() - mk)).sum::<f64>() / n;
            assert!((fit.joint.cov_at(j, k) - c).abs() < 1e-10);
        }
    }
}

#[test]
fn irls_recovers_coefficients_within_three_se() {
    let beta = [0.4, -1.0, 0.5];
    for seed in 0..5 {
        let (x, y) = common::logistic_data(seed, 4000, &beta);
        let fit = irls_logistic(&x, &y, IrlsOptions::default()).unwrap();
        assert!(fit.converged);
        for j in 0..3 {
            let z = (fit.coef[j] - beta[j]) / fit.cov[(j, j)].sqrt();
            assert!(z.abs() < 3.0, "seed {seed} coef {j}: z = {z}");
        }
        // score is zero at the estimate
        let p: Vec<f64> = (0..x.nrows())
            .map(|i| 1.0 / (1.0 + (-(0..3).map(|j| x[(i, j)] * fit.coef[j]).sum::<f64>()).exp()))
            .collect();
        for j in 0..3 {
            let s: f64 = (0..x.nrows()).map(|i| x[(i, j)] * (y[i] - p[i])).sum();
            assert!(s.abs() < 1e-6, "score {s}");
        }
    }
}

#[test]
fn irls_reports_separation() {
    let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
    let y = DVector::from_fn(20, |i, _| if i >= 10 { 1.0 } else { 0.0 });
    match irls_logistic(&x, &y, IrlsOptions::default()) {
        Ok(fit) => assert!(!fit.converged || fit.coef[1].abs() > 5.0),
        Err(_) => {}
    }
}
