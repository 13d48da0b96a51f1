//! Reference computations that share no code with the library.
#![allow(dead_code)]

use missforecast::MaskedMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Least squares through the normal equations, solved by LU.
pub fn lstsq_normal(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    (x.transpose() * x).lu().solve(&(x.transpose() * y)).expect("full rank")
}

/// Observed-data Gaussian log-likelihood, one row at a time with an explicit
/// inverse and LU determinant.
pub fn observed_loglik(data: &MaskedMatrix, mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..data.nrows() {
        let obs: Vec<usize> = (0..data.ncols()).filter(|&j| !data.is_missing(i, j)).collect();
        if obs.is_empty() {
            continue;
        }
        let k = obs.len();
        let s = DMatrix::from_fn(k, k, |a, b| cov[(obs[a], obs[b])]);
        let r = DVector::from_fn(k, |a, _| data.get(i, obs[a]).unwrap() - mean[obs[a]]);
        let det = s.clone().lu().determinant();
        let inv = s.try_inverse().expect("invertible");
        let quad = (r.transpose() * inv * &r)[(0, 0)];
        total += -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad);
    }
    total
}

/// Random correlated Gaussian rows with cells removed at rate `miss`,
/// keeping at least one observed cell per row.
pub fn fuzzed_matrix(seed: u64, n: usize, d: usize, miss: f64) -> MaskedMatrix {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(d, d, |_, _| r.sample::<f64, _>(StandardNormal));
    let mu: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z = DVector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal));
        let x = &a * z;
        let keep = r.random_range(0..d);
        rows.push(
            (0..d)
                .map(|j| if j != keep && r.random_bool(miss) { None } else { Some(x[j] + mu[j]) })
                .collect::<Vec<_>>(),
        );
    }
    MaskedMatrix::from_rows(&rows).unwrap()
}

/// Logistic data with known coefficients.
pub fn logistic_data(seed: u64, n: usize, beta: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let mut r = rng(seed);
    let q = beta.len();
    let x = DMatrix::from_fn(n, q, |_, j| if j == 0 { 1.0 } else { r.sample::<f64, _>(StandardNormal) });
    let y = DVector::from_fn(n, |i, _| {
        let eta: f64 = (0..q).map(|j| x[(i, j)] * beta[j]).sum();
        let p = 1.0 / (1.0 + (-eta).exp());
        if r.random_bool(p) {
            1.0
        } else {
            0.0
        }
    });
    (x, y)
}
