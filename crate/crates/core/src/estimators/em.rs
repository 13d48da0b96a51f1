use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::gaussian::GaussianJoint;
use crate::domain::MaskedMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct EmOptions {
    /// Stop once the log-likelihood gain of an iteration is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { tol: 1e-8, max_iter: 10_000 }
    }
}

#[derive(Clone, Debug)]
pub struct MvnFit {
    pub joint: GaussianJoint,
    /// Observed-data log-likelihood at the returned parameters.
    pub loglik: f64,
    pub iterations: usize,
    /// Log-likelihood at the start of every iteration, then at the returned parameters.
    pub loglik_trace: Vec<f64>,
    pub rows_used: usize,
}

const RIDGE: f64 = 1e-10;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Rows grouped by observed-column set.
struct PatternGroup {
    observed: Vec<usize>,
    missing: Vec<usize>,
    rows: Vec<Vec<f64>>, // observed values only
}

fn group_rows(data: &MaskedMatrix) -> Vec<PatternGroup> {
    let d = data.ncols();
    let mut groups: BTreeMap<Vec<bool>, PatternGroup> = BTreeMap::new();
    for i in 0..data.nrows() {
        let mask = data.row_mask(i).to_vec();
        if mask.iter().all(|&m| m) {
            continue;
        }
        let g = groups.entry(mask.clone()).or_insert_with(|| PatternGroup {
            observed: (0..d).filter(|&j| !mask[j]).collect(),
            missing: (0..d).filter(|&j| mask[j]).collect(),
            rows: Vec::new(),
        });
        let vals = g.observed.iter().map(|&j| data.get(i, j)).collect::<Result<Vec<_>>>();
        g.rows.push(vals.expect("observed cells are readable"));
    }
    groups.into_values().collect()
}

fn sub(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

fn chol_with_repair(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Ok(c);
    }
    log::warn!("covariance lost positive definiteness; adding {RIDGE:e} ridge");
    let repaired = m + DMatrix::identity(m.nrows(), m.ncols()) * RIDGE;
    repaired
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance not positive definite after ridge repair".into()))
}

fn loglik(groups: &[PatternGroup], mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let mut total = 0.0;
    for g in groups {
        let s_oo = sub(cov, &g.observed, &g.observed);
        let chol = chol_with_repair(&s_oo)?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let k = g.observed.len() as f64;
        for row in &g.rows {
            let r = DVector::from_iterator(
                row.len(),
                row.iter().zip(&g.observed).map(|(v, &j)| v - mean[j]),
            );
            let quad = r.dot(&chol.solve(&r));
            total += -0.5 * (k * LN_2PI + logdet + quad);
        }
    }
    Ok(total)
}

/// Maximum-likelihood mean and covariance of a multivariate Gaussian from
/// rows with missing entries, by expectation-maximisation.
pub fn em_mvn(data: &MaskedMatrix, opts: EmOptions) -> Result<MvnFit> {
    let d = data.ncols();
    for j in 0..d {
        if data.col_observed_count(j) < 2 {
            return Err(Error::Input(format!("column {j} is observed fewer than twice")));
        }
    }
    let groups = group_rows(data);
    let n: usize = groups.iter().map(|g| g.rows.len()).sum();
    let nf = n as f64;

    // start from observed means and a diagonal of observed variances
    let mut mean = DVector::zeros(d);
    let mut cov = DMatrix::zeros(d, d);
    for j in 0..d {
        let vals: Vec<f64> = (0..data.nrows()).filter_map(|i| data.opt(i, j)).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
        mean[j] = m;
        cov[(j, j)] = if v > 0.0 { v } else { 1.0 };
    }

    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        let ll = loglik(&groups, &mean, &cov)?;
        trace.push(ll);
        if it > 0 && ll - prev <= opts.tol {
            break;
        }
        prev = ll;
        iterations = it + 1;

        let mut t1 = DVector::zeros(d);
        let mut t2 = DMatrix::zeros(d, d);
        for g in &groups {
            let (reg, cond_cov) = if g.missing.is_empty() {
                (None, None)
            } else {
                let s_oo = sub(&cov, &g.observed, &g.observed);
                let s_mo = sub(&cov, &g.missing, &g.observed);
                let chol = chol_with_repair(&s_oo)?;
                let b = chol.solve(&s_mo.transpose()).transpose(); // S_mo S_oo^{-1}
                let c = sub(&cov, &g.missing, &g.missing) - &b * s_mo.transpose();
                (Some(b), Some(c))
            };
            for row in &g.rows {
                let mut full = DVector::zeros(d);
                for (v, &j) in row.iter().zip(&g.observed) {
                    full[j] = *v;
                }
                if let Some(b) = &reg {
                    let r = DVector::from_iterator(
                        row.len(),
                        row.iter().zip(&g.observed).map(|(v, &j)| v - mean[j]),
                    );
                    let fill = b * r;
                    for (a, &j) in g.missing.iter().enumerate() {
                        full[j] = mean[j] + fill[a];
                    }
                }
                t1 += &full;
                t2 += &full * full.transpose();
            }
            if let Some(c) = &cond_cov {
                let k = g.rows.len() as f64;
                for (a, &ja) in g.missing.iter().enumerate() {
                    for (b, &jb) in g.missing.iter().enumerate() {
                        t2[(ja, jb)] += k * c[(a, b)];
                    }
                }
            }
        }
        mean = t1 / nf;
        cov = t2 / nf - &mean * mean.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
        if cov.clone().cholesky().is_none() {
            chol_with_repair(&cov)?;
            cov += DMatrix::identity(d, d) * RIDGE;
        }
    }
    let final_ll = loglik(&groups, &mean, &cov)?;
    if trace.last() != Some(&final_ll) {
        trace.push(final_ll);
    }
    Ok(MvnFit {
        joint: GaussianJoint::new(mean, cov),
        loglik: final_ll,
        iterations,
        loglik_trace: trace,
        rows_used: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn complete_data_gives_sample_moments() {
        let rows = vec![
            vec![Some(1.0), Some(2.0)],
            vec![Some(2.0), Some(1.0)],
            vec![Some(4.0), Some(5.0)],
            vec![Some(-1.0), Some(0.5)],
        ];
        let m = MaskedMatrix::from_rows(&rows).unwrap();
        let fit = em_mvn(&m, EmOptions::default()).unwrap();
        let xs = [1.0, 2.0, 4.0, -1.0];
        let ys = [2.0, 1.0, 5.0, 0.5];
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let sxy = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(fit.joint.mean[0], mx, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.joint.mean[1], my, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.joint.cov_at(0, 1), sxy, epsilon = 1e-12);
        assert!(fit.iterations <= 2);
    }

    #[test]
    fn sparse_column_rejected() {
        let rows = vec![vec![Some(1.0), None], vec![Some(2.0), Some(1.0)], vec![Some(3.0), None]];
        let m = MaskedMatrix::from_rows(&rows).unwrap();
        assert!(matches!(em_mvn(&m, EmOptions::default()), Err(Error::Input(_))));
    }
}
