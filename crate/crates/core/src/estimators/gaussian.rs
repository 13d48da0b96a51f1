use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multivariate Gaussian with dense covariance, serialisable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianJoint {
    pub mean: Vec<f64>,
    /// Row-major `d x d` covariance.
    pub cov: Vec<f64>,
}

impl GaussianJoint {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        let d = mean.len();
        let mut flat = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                flat.push(cov[(i, j)]);
            }
        }
        GaussianJoint { mean: mean.as_slice().to_vec(), cov: flat }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_at(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim() + j]
    }

    pub fn mean_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mean)
    }

    pub fn cov_mat(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.cov)
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.cov_at(rows[a], cols[b]))
    }

    /// Conditional law of the `targets` coordinates given observed values of
    /// other coordinates (Schur complement). Empty evidence gives the marginal.
    pub fn conditional(
        &self,
        targets: &[usize],
        given: &[(usize, f64)],
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let t_mean = DVector::from_iterator(targets.len(), targets.iter().map(|&t| self.mean[t]));
        let s_tt = self.block(targets, targets);
        if given.is_empty() {
            return Ok((t_mean, s_tt));
        }
        let g_idx: Vec<usize> = given.iter().map(|&(j, _)| j).collect();
        let resid = DVector::from_iterator(g_idx.len(), given.iter().map(|&(j, v)| v - self.mean[j]));
        let s_gg = self.block(&g_idx, &g_idx);
        let s_tg = self.block(targets, &g_idx);
        let chol = s_gg.cholesky().ok_or_else(|| {
            Error::Numeric("observed-block covariance is not positive definite".into())
        })?;
        let w = chol.solve(&s_tg.transpose()); // S_gg^{-1} S_gt
        let mean = t_mean + w.transpose() * resid;
        let cov = s_tt - &s_tg * w;
        Ok((mean, cov))
    }

    /// Mean and variance of a single coordinate given observed coordinates.
    pub fn conditional_scalar(&self, target: usize, given: &[(usize, f64)]) -> Result<(f64, f64)> {
        let (m, c) = self.conditional(&[target], given)?;
        Ok((m[0], c[(0, 0)].max(0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bivariate_conditional() {
        let g = GaussianJoint { mean: vec![1.0, 2.0], cov: vec![2.0, 1.0, 1.0, 1.0] };
        let (m, v) = g.conditional_scalar(0, &[(1, 3.0)]).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        let (m, v) = g.conditional_scalar(0, &[]).unwrap();
        assert_eq!((m, v), (1.0, 2.0));
    }
}
