use nalgebra::DVector;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::{LinearFit, LogisticFit};

/// One draw of (coefficients, sigma) from the posterior of a linear model
/// under the noninformative prior: sigma^2 is scaled inverse-chi-square with
/// n - q degrees of freedom and the coefficients are Gaussian around the
/// least-squares estimate with covariance sigma^2 (X'X)^{-1}.
pub fn posterior_draw<R: Rng + ?Sized>(fit: &LinearFit, rng: &mut R) -> (Vec<f64>, f64) {
    let q = fit.coef.len();
    let df = fit.n_used.saturating_sub(q);
    if fit.resid_var <= 0.0 || df == 0 {
        return (fit.coef.clone(), 0.0);
    }
    let chi2: f64 = ChiSquared::new(df as f64).expect("df > 0").sample(rng);
    let sigma2 = fit.resid_var * df as f64 / chi2;
    let sigma = sigma2.sqrt();
    let z = DVector::from_iterator(q, (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let coef = match fit.xtx_inv.clone().cholesky() {
        Some(ch) => {
            let shift = ch.l() * z * sigma;
            fit.coef.iter().zip(shift.iter()).map(|(c, s)| c + s).collect()
        }
        None => fit.coef.clone(),
    };
    (coef, sigma)
}

/// Coefficient draw from the normal approximation to a logistic posterior.
pub fn logistic_posterior_draw<R: Rng + ?Sized>(fit: &LogisticFit, rng: &mut R) -> Vec<f64> {
    let q = fit.coef.len();
    let z = DVector::from_iterator(q, (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)));
    match fit.cov.clone().cholesky() {
        Some(ch) => {
            let shift = ch.l() * z;
            fit.coef.iter().zip(shift.iter()).map(|(c, s)| c + s).collect()
        }
        None => fit.coef.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{design, ols};
    use crate::seed;

    #[test]
    fn degenerate_posterior() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let x = design(4, 2, |i, r| {
            r[0] = 1.0;
            r[1] = xs[i];
        });
        let y = DVector::from_iterator(4, xs.iter().map(|v| 3.0 * v - 1.0));
        let fit = ols(&x, &y).unwrap();
        let mut rng = seed::rng(1);
        let (coef, sigma) = posterior_draw(&fit, &mut rng);
        assert_eq!(sigma, 0.0);
        assert_eq!(coef, fit.coef);
    }
}
