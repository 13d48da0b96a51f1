use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares fit with the quantities needed for posterior draws.
#[derive(Clone, Debug)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub resid_var: f64,
    pub n_used: usize,
    /// (X'X)^{-1}
    pub xtx_inv: DMatrix<f64>,
}

impl LinearFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.coef.iter().zip(row).map(|(b, x)| b * x).sum()
    }
}

const RANK_TOL: f64 = 1e-9;

fn rank_defect(r: &DMatrix<f64>, x: &DMatrix<f64>) -> Option<usize> {
    (0..x.ncols()).find(|&j| {
        let norm = x.column(j).norm();
        norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm
    })
}

/// Fails with [`Error::SingularDesign`] naming the first column that lies in
/// the span of the columns before it.
pub fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() < x.ncols() {
        return Err(Error::Input(format!(
            "{} rows cannot identify {} coefficients",
            x.nrows(),
            x.ncols()
        )));
    }
    let r = x.clone().qr().r();
    match rank_defect(&r, x) {
        Some(j) => Err(Error::SingularDesign { column: j, name: format!("column {j}") }),
        None => Ok(()),
    }
}

/// Ordinary least squares through a Householder QR decomposition.
/// `resid_var` is RSS / (n - q).
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearFit> {
    let (n, q) = x.shape();
    if y.len() != n {
        return Err(Error::Input("design and response lengths differ".into()));
    }
    if n <= q {
        return Err(Error::Input(format!("ols needs n > q (n = {n}, q = {q})")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    if let Some(j) = rank_defect(&r, x) {
        return Err(Error::SingularDesign { column: j, name: format!("column {j}") });
    }
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let resid = y - x * &coef;
    let rss = resid.norm_squared();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or_else(|| Error::Numeric("triangular inverse failed".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok(LinearFit {
        coef: coef.as_slice().to_vec(),
        resid_var: rss / (n - q) as f64,
        n_used: n,
        xtx_inv: (&xtx_inv + xtx_inv.transpose()) * 0.5,
    })
}

/// Fit after dropping aliased columns one at a time, as a rank-revealing
/// regression would. Returns the fit and the kept column indices.
pub fn fit_pruned<T, F>(x: &DMatrix<f64>, mut fit: F) -> Result<(T, Vec<usize>)>
where
    F: FnMut(&DMatrix<f64>) -> Result<T>,
{
    let mut kept: Vec<usize> = (0..x.ncols()).collect();
    loop {
        let sub = x.select_columns(&kept);
        match fit(&sub) {
            Err(Error::SingularDesign { column, .. }) if kept.len() > 1 => {
                kept.remove(column);
            }
            other => return other.map(|f| (f, kept)),
        }
    }
}
