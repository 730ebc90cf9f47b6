//! Dense SVD through faer; nalgebra's bidiagonal SVD can return a wrong
//! factorization for rank-deficient input.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RidgeError};

/// `A = U diag(sigma) V^T` with `k = min(rows, cols)` columns in `U` and `V`,
/// singular values nonincreasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|_| RidgeError::SvdNoConvergence)?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Ok(ThinSvd {
        u: DMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
        sigma: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(cols, k, |i, j| v[(i, j)]),
    })
}

/// Singular values, nonincreasing.
pub fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    if a.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let sv = to_faer(a)
        .singular_values()
        .map_err(|_| RidgeError::SvdNoConvergence)?;
    Ok(DVector::from_vec(sv))
}
