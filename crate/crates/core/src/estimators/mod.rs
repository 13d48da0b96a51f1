//! Numerical estimation kernels on small dense problems.

mod em;
mod gaussian;
mod logistic;
mod ols;
mod posterior;

pub use em::{em_mvn, EmOptions, MvnFit};
pub use gaussian::GaussianJoint;
pub use logistic::{irls_logistic, logistic, IrlsOptions, LogisticFit};
pub use ols::{check_rank, fit_pruned, ols, LinearFit};
pub use posterior::{logistic_posterior_draw, posterior_draw};

use nalgebra::{DMatrix, DVector};

/// Build an `n x q` design from a row closure writing `q` entries.
pub fn design<F>(n: usize, q: usize, mut fill: F) -> DMatrix<f64>
where
    F: FnMut(usize, &mut [f64]),
{
    let mut data = vec![0.0; n * q];
    for i in 0..n {
        fill(i, &mut data[i * q..(i + 1) * q]);
    }
    DMatrix::from_row_slice(n, q, &data)
}

pub fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
