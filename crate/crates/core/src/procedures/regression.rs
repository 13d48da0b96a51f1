use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::PredictiveDistribution;
use crate::error::{Error, Result};
use crate::estimators::{
    fit_pruned, irls_logistic, logistic, logistic_posterior_draw, ols, posterior_draw, IrlsOptions, LinearFit,
    LogisticFit,
};

/// Linear or logistic regression on a subset of design columns. Columns
/// aliased with earlier ones are dropped at fit time and `kept` lists the
/// survivors, so prediction takes the full design row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub kept: Vec<usize>,
    pub coef: Vec<f64>,
    /// Residual variance for the linear case; 0 for logistic.
    pub resid_var: f64,
    pub binary: bool,
    pub n_used: usize,
}

/// A fitted regression that can also produce posterior draws.
pub(crate) enum RichFit {
    Linear(LinearFit, Vec<usize>),
    Logistic(LogisticFit, Vec<usize>),
}

impl RichFit {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, binary: bool) -> Result<Self> {
        if binary {
            let (f, kept) = fit_pruned(x, |m| irls_logistic(m, y, IrlsOptions::default()))?;
            Ok(RichFit::Logistic(f, kept))
        } else {
            let (f, kept) = fit_pruned(x, |m| ols(m, y))?;
            Ok(RichFit::Linear(f, kept))
        }
    }

    pub fn summary(&self) -> Regression {
        match self {
            RichFit::Linear(f, kept) => Regression {
                kept: kept.clone(),
                coef: f.coef.clone(),
                resid_var: f.resid_var,
                binary: false,
                n_used: f.n_used,
            },
            RichFit::Logistic(f, kept) => Regression {
                kept: kept.clone(),
                coef: f.coef.clone(),
                resid_var: 0.0,
                binary: true,
                n_used: 0,
            },
        }
    }

    /// Regression with coefficients (and noise scale) drawn from the posterior.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Regression {
        match self {
            RichFit::Linear(f, kept) => {
                let (coef, sigma) = posterior_draw(f, rng);
                Regression { kept: kept.clone(), coef, resid_var: sigma * sigma, binary: false, n_used: f.n_used }
            }
            RichFit::Logistic(f, kept) => Regression {
                kept: kept.clone(),
                coef: logistic_posterior_draw(f, rng),
                resid_var: 0.0,
                binary: true,
                n_used: 0,
            },
        }
    }
}

impl Regression {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, binary: bool) -> Result<Self> {
        Ok(RichFit::fit(x, y, binary)?.summary())
    }

    /// Linear predictor for a full design row.
    pub fn eta(&self, row: &[f64]) -> f64 {
        self.kept.iter().zip(&self.coef).map(|(&j, b)| b * row[j]).sum()
    }

    /// Conditional mean (probability for the logistic case).
    pub fn mean(&self, row: &[f64]) -> f64 {
        let e = self.eta(row);
        if self.binary {
            logistic(e)
        } else {
            e
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<PredictiveDistribution> {
        if self.binary {
            PredictiveDistribution::bernoulli(self.mean(row))
        } else {
            PredictiveDistribution::gaussian(self.mean(row), self.resid_var)
        }
    }

    /// Draw a value from the fitted conditional law.
    pub fn sample<R: Rng + ?Sized>(&self, row: &[f64], rng: &mut R) -> f64 {
        let m = self.mean(row);
        if self.binary {
            if rng.random::<f64>() < m {
                1.0
            } else {
                0.0
            }
        } else {
            m + self.resid_var.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
        }
    }
}

/// Fit on design rows `x` (row-major, `q` columns each).
pub(crate) fn fit_rows(rows: &[Vec<f64>], y: &[f64], binary: bool) -> Result<RichFit> {
    if rows.is_empty() {
        return Err(Error::Training("no rows to fit".into()));
    }
    let q = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), q, |i, j| rows[i][j]);
    RichFit::fit(&x, &DVector::from_column_slice(y), binary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aliased_column_is_dropped() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 1.0 + 3.0 * i as f64).collect();
        let r = fit_rows(&rows, &y, false).unwrap().summary();
        assert_eq!(r.kept, vec![0, 1]);
        assert!((r.mean(&[1.0, 4.0, 8.0]) - 13.0).abs() < 1e-10);
    }
}
