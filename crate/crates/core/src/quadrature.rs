//! Gauss-Hermite rules for expectations under Gaussian laws.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 64;

/// Rule for `E[f(Z)]` with `Z ~ N(0, 1)`: `sum_i weights[i] * f(nodes[i])`.
#[derive(Clone, Debug)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Physicists' Gauss-Hermite nodes and weights (weight `exp(-x^2)`), found
/// by Newton iteration on the orthonormal three-term recurrence.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Input("quadrature needs at least one node".into()));
    }
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    // Jacobi-matrix eigenvalues are good starting points for any n.
    let jac = nalgebra::DMatrix::from_fn(n, n, |r, c| {
        if r.abs_diff(c) == 1 {
            (r.max(c) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(|a, b| b.total_cmp(a));
    for i in 0..m {
        let mut z = guesses[i];
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numeric(format!("Hermite root {i} of {n} did not converge")));
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

impl NormalRule {
    pub fn new(n: usize) -> Result<Self> {
        let (x, w) = gauss_hermite(n)?;
        let s2 = std::f64::consts::SQRT_2;
        let rpi = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().map(|v| v * s2).collect();
        let mut weights: Vec<f64> = w.iter().map(|v| v / rpi).collect();
        nodes.reverse();
        weights.reverse();
        Ok(NormalRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(X)]` for `X ~ N(mean, var)`.
    pub fn expect1<F: FnMut(f64) -> f64>(&self, mean: f64, var: f64, mut f: F) -> f64 {
        let sd = var.max(0.0).sqrt();
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(mean + sd * z)).sum()
    }

    /// Tensor rule for `E[f(X)]` with `X ~ N(mean, cov)`; `f` receives the point.
    /// The callback may accumulate several integrals at once.
    pub fn for_each_point<F: FnMut(&[f64], f64)>(
        &self,
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
        mut f: F,
    ) -> Result<()> {
        let d = mean.len();
        if d == 0 {
            f(&[], 1.0);
            return Ok(());
        }
        let l = cholesky_psd(cov)?;
        let n = self.len();
        let mut idx = vec![0usize; d];
        let mut z = vec![0.0; d];
        let mut point = vec![0.0; d];
        loop {
            let mut weight = 1.0;
            for k in 0..d {
                z[k] = self.nodes[idx[k]];
                weight *= self.weights[idx[k]];
            }
            for r in 0..d {
                let mut v = mean[r];
                for c in 0..=r {
                    v += l[(r, c)] * z[c];
                }
                point[r] = v;
            }
            f(&point, weight);
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == d {
                    return Ok(());
                }
            }
        }
    }
}

/// Lower Cholesky factor that tolerates exactly singular directions.
fn cholesky_psd(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    let mut l = DMatrix::<f64>::zeros(d, d);
    let scale = (0..d).map(|i| cov[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    for j in 0..d {
        let mut s = cov[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s < -1e-12 * scale {
            return Err(Error::Numeric("covariance is not positive semi-definite".into()));
        }
        let diag = s.max(0.0).sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..d {
            let mut t = cov[(i, j)];
            for k in 0..j {
                t -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = if diag > 0.0 { t / diag } else { 0.0 };
        }
    }
    Ok(l)
}
