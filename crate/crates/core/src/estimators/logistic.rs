use nalgebra::{DMatrix, DVector};

use super::ols::check_rank;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct IrlsOptions {
    /// Convergence threshold on the max-norm of the score.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions { tol: 1e-8, max_iter: 50 }
    }
}

#[derive(Clone, Debug)]
pub struct LogisticFit {
    pub coef: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    /// Deviance after each accepted step, starting from the zero vector.
    pub deviance_trace: Vec<f64>,
    /// Inverse observed information at the estimate.
    pub cov: DMatrix<f64>,
}

impl LogisticFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        logistic(self.coef.iter().zip(row).map(|(b, x)| b * x).sum())
    }
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn deviance(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    2.0 * eta.iter().zip(y.iter()).map(|(&e, &yi)| softplus(e) - yi * e).sum::<f64>()
}

/// X' diag(w) X without forming the n x n diagonal.
fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (mut row, &wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    x.transpose() * xw
}

// Beyond this linear predictor the fitted probabilities are 0/1 to machine
// precision and the likelihood has no finite maximiser.
const ETA_DIVERGED: f64 = 35.0;

/// Newton-Raphson on the Bernoulli log-likelihood with step-halving on
/// deviance increase.
pub fn irls_logistic(x: &DMatrix<f64>, y: &DVector<f64>, opts: IrlsOptions) -> Result<LogisticFit> {
    let (n, q) = x.shape();
    if y.len() != n {
        return Err(Error::Input("design and response lengths differ".into()));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Input("logistic response must be 0/1".into()));
    }
    check_rank(x)?;

    let mut beta = DVector::zeros(q);
    let mut dev = deviance(x, y, &beta);
    let mut trace = vec![dev];
    let mut converged = false;
    let mut iterations = 0;
    let mut hessian = DMatrix::zeros(q, q);

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let eta = x * &beta;
        let p = eta.map(logistic);
        let w = p.map(|v| v * (1.0 - v));
        let grad = x.transpose() * (y - &p);
        hessian = weighted_gram(x, &w);
        let step = match hessian.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => return Err(Error::Separation { iterations }),
        };
        let grad_small = grad.amax() <= opts.tol;
        if grad_small {
            // A vanishing score with a non-vanishing Newton step means the
            // information has collapsed along a separating direction.
            if step.amax() > 1e-3 && eta.amax() > 10.0 {
                return Err(Error::Separation { iterations });
            }
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut trial = &beta + &step * t;
        let mut trial_dev = deviance(x, y, &trial);
        let mut halvings = 0;
        while trial_dev > dev + 1e-12 * (1.0 + dev) && halvings < 40 {
            t *= 0.5;
            trial = &beta + &step * t;
            trial_dev = deviance(x, y, &trial);
            halvings += 1;
        }
        beta = trial;
        dev = trial_dev;
        trace.push(dev);
        if (x * &beta).amax() > ETA_DIVERGED {
            return Err(Error::Separation { iterations });
        }
    }

    if !converged {
        log::warn!("logistic regression did not converge in {} iterations", opts.max_iter);
        let eta = x * &beta;
        let w = eta.map(|e| {
            let p = logistic(e);
            p * (1.0 - p)
        });
        hessian = weighted_gram(x, &w);
    }
    let cov = hessian
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::Separation { iterations })?;
    Ok(LogisticFit {
        coef: beta.as_slice().to_vec(),
        converged,
        iterations,
        deviance: dev,
        deviance_trace: trace,
        cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::design;
    use approx::assert_abs_diff_eq;

    #[test]
    fn independent_balanced_response() {
        // y alternates independently of x: the slope MLE is exactly 0.
        let xs = [-1.0, -1.0, 1.0, 1.0, 2.0, 2.0];
        let ys = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let x = design(6, 2, |i, r| {
            r[0] = 1.0;
            r[1] = xs[i];
        });
        let f = irls_logistic(&x, &DVector::from_row_slice(&ys), IrlsOptions::default()).unwrap();
        assert!(f.converged);
        assert_abs_diff_eq!(f.coef[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.coef[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn intercept_only_is_logit_of_mean() {
        let ys = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let x = DMatrix::from_element(8, 1, 1.0);
        let f = irls_logistic(&x, &DVector::from_row_slice(&ys), IrlsOptions::default()).unwrap();
        assert_abs_diff_eq!(f.coef[0], (0.25f64 / 0.75).ln(), epsilon = 1e-9);
    }

    #[test]
    fn separated_data_is_rejected() {
        let xs = [-2.0, -1.0, 1.0, 2.0];
        let ys = [0.0, 0.0, 1.0, 1.0];
        let x = design(4, 2, |i, r| {
            r[0] = 1.0;
            r[1] = xs[i];
        });
        let err = irls_logistic(&x, &DVector::from_row_slice(&ys), IrlsOptions::default());
        assert!(matches!(err, Err(Error::Separation { .. })), "{err:?}");
    }

    #[test]
    fn non_binary_response_rejected() {
        let x = DMatrix::from_element(3, 1, 1.0);
        let y = DVector::from_row_slice(&[0.0, 0.5, 1.0]);
        assert!(matches!(irls_logistic(&x, &y, IrlsOptions::default()), Err(Error::Input(_))));
    }
}
