//! The Vandermonde-like matrix `V(U)` with entries `psi_j(eta(U^T x_i))`, its
//! derivatives with respect to the entries of `U`, and conditioning.

use nalgebra::DMatrix;

use crate::basis::{AffineMap, BasisFamily, IndexSet};
use crate::error::{Result, RidgeError};
use crate::grassmann::Subspace;

/// `V(U)` together with everything needed to reinterpret its columns.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub index_set: IndexSet,
    pub family: BasisFamily,
    pub affine: AffineMap,
}

/// Derivatives of `V(U)` with respect to each entry `U[k, l]`.
///
/// Slice `(k, l)` factors as `diag(X[:, k]) * partials[l]`, where
/// `partials[l][i, j] = d_l * d psi_j / d z_l` at `z = eta(U^T x_i)`. Only
/// the `n` partial matrices are stored; slices are materialized on request.
#[derive(Debug, Clone)]
pub struct DesignDerivative {
    points: DMatrix<f64>,
    partials: Vec<DMatrix<f64>>,
}

impl DesignDerivative {
    pub fn ambient_dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn dim(&self) -> usize {
        self.partials.len()
    }

    /// `d_l * d psi / d z_l` evaluated at every sample (`M x N`).
    pub fn partial(&self, l: usize) -> &DMatrix<f64> {
        &self.partials[l]
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// `dV / dU[k, l]` as an `M x N` matrix.
    pub fn slice(&self, k: usize, l: usize) -> DMatrix<f64> {
        let mut out = self.partials[l].clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row.scale_mut(self.points[(i, k)]);
        }
        out
    }
}

fn check_shapes(
    points: &DMatrix<f64>,
    u: &Subspace,
    index_set: &IndexSet,
    affine: &AffineMap,
) -> Result<()> {
    if points.ncols() != u.ambient_dim() {
        return Err(RidgeError::DimensionMismatch(format!(
            "points have {} columns but the subspace lives in R^{}",
            points.ncols(),
            u.ambient_dim()
        )));
    }
    if points.nrows() == 0 {
        return Err(RidgeError::InvalidArgument(
            "design needs at least one point".into(),
        ));
    }
    if index_set.dim() != u.dim() || affine.dim() != u.dim() {
        return Err(RidgeError::DimensionMismatch(format!(
            "subspace dimension {} but index set has {} and affine map has {}",
            u.dim(),
            index_set.dim(),
            affine.dim()
        )));
    }
    Ok(())
}

/// Normalized projected coordinates `eta(U^T x_i)`, one row per sample.
pub fn normalized_coordinates(
    points: &DMatrix<f64>,
    u: &Subspace,
    affine: &AffineMap,
) -> DMatrix<f64> {
    let mut z = points * u.matrix();
    for (k, mut col) in z.column_iter_mut().enumerate() {
        for v in col.iter_mut() {
            *v = affine.apply_coord(k, *v);
        }
    }
    z
}

/// Evaluates every basis element at already-normalized coordinates.
pub fn design_from_coordinates(
    coords: &DMatrix<f64>,
    index_set: &IndexSet,
    family: BasisFamily,
) -> DMatrix<f64> {
    let (rows, n) = coords.shape();
    let p = index_set.degree();
    let big_n = index_set.len();
    let mut table = vec![0.0; n * (p + 1)];
    let mut v = DMatrix::zeros(rows, big_n);
    for i in 0..rows {
        for l in 0..n {
            family.fill_values(coords[(i, l)], &mut table[l * (p + 1)..(l + 1) * (p + 1)]);
        }
        for (j, alpha) in index_set.iter().enumerate() {
            let mut prod = 1.0;
            for (l, &e) in alpha.exponents().iter().enumerate() {
                prod *= table[l * (p + 1) + e];
            }
            v[(i, j)] = prod;
        }
    }
    v
}

/// `V(U)` with `[V]_{ij} = psi_j(eta(U^T x_i))`; `points` is `M x m`.
pub fn build_design(
    points: &DMatrix<f64>,
    u: &Subspace,
    index_set: &IndexSet,
    family: BasisFamily,
    affine: &AffineMap,
) -> Result<DesignMatrix> {
    check_shapes(points, u, index_set, affine)?;
    let coords = normalized_coordinates(points, u, affine);
    let values = design_from_coordinates(&coords, index_set, family);
    Ok(DesignMatrix {
        values,
        index_set: index_set.clone(),
        family,
        affine: affine.clone(),
    })
}

/// All `dV/dU[k, l]` with the affine map held fixed.
pub fn build_design_derivative(
    points: &DMatrix<f64>,
    u: &Subspace,
    index_set: &IndexSet,
    family: BasisFamily,
    affine: &AffineMap,
) -> Result<DesignDerivative> {
    check_shapes(points, u, index_set, affine)?;
    let coords = normalized_coordinates(points, u, affine);
    let (rows, n) = coords.shape();
    let p = index_set.degree();
    let big_n = index_set.len();
    let mut vals = vec![0.0; n * (p + 1)];
    let mut ders = vec![0.0; n * (p + 1)];
    let mut partials = vec![DMatrix::zeros(rows, big_n); n];
    for i in 0..rows {
        for l in 0..n {
            let span = l * (p + 1)..(l + 1) * (p + 1);
            family.fill_values_and_derivatives(
                coords[(i, l)],
                &mut vals[span.clone()],
                &mut ders[span],
            );
        }
        for (j, alpha) in index_set.iter().enumerate() {
            let exps = alpha.exponents();
            for (l, partial) in partials.iter_mut().enumerate() {
                if exps[l] == 0 {
                    continue;
                }
                let mut prod = affine.scale()[l] * ders[l * (p + 1) + exps[l]];
                for (q, &e) in exps.iter().enumerate() {
                    if q != l {
                        prod *= vals[q * (p + 1) + e];
                    }
                }
                partial[(i, j)] = prod;
            }
        }
    }
    Ok(DesignDerivative {
        points: points.clone(),
        partials,
    })
}

/// Ratio of extreme singular values of a dense matrix; `+inf` when the
/// smallest is exactly zero.
pub fn matrix_condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(RidgeError::Underdetermined { rows, cols });
    }
    let sv = crate::linalg::singular_values(a)?;
    let smax = sv.max();
    let smin = sv.min();
    if smin == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(smax / smin)
    }
}

/// 2-norm condition number of the design matrix.
pub fn condition_number(design: &DesignMatrix) -> Result<f64> {
    matrix_condition_number(&design.values)
}
