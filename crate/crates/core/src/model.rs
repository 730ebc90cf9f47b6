//! The fitted ridge approximation `g(U^T x)`.

use nalgebra::{DMatrix, DVector};

use crate::basis::{binomial, enumerate_indices, AffineMap, BasisFamily, IndexSet};
use crate::error::{Result, RidgeError};
use crate::grassmann::Subspace;
use crate::vandermonde::{design_from_coordinates, normalized_coordinates};

/// Subspace, basis, normalization and coefficients of a polynomial ridge
/// approximation. Coefficients follow the graded-lexicographic index order.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    degree: usize,
    family: BasisFamily,
    subspace: Subspace,
    affine: AffineMap,
    coefficients: DVector<f64>,
    training_residual_norm: f64,
}

impl RidgeModel {
    pub fn new(
        degree: usize,
        family: BasisFamily,
        subspace: Subspace,
        affine: AffineMap,
        coefficients: DVector<f64>,
        training_residual_norm: f64,
    ) -> Result<Self> {
        let n = subspace.dim();
        if affine.dim() != n {
            return Err(RidgeError::DimensionMismatch(format!(
                "affine map has dimension {} but subspace has {n}",
                affine.dim()
            )));
        }
        let expected = binomial(n + degree, degree);
        if coefficients.len() != expected {
            return Err(RidgeError::DimensionMismatch(format!(
                "{} coefficients given, a degree-{degree} basis in {n} variables has {expected}",
                coefficients.len()
            )));
        }
        if let Some(j) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(RidgeError::NonFinite {
                what: "coefficients",
                row: j,
                col: 0,
            });
        }
        Ok(RidgeModel {
            degree,
            family,
            subspace,
            affine,
            coefficients,
            training_residual_norm,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.subspace.ambient_dim()
    }

    pub fn dim(&self) -> usize {
        self.subspace.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn affine(&self) -> &AffineMap {
        &self.affine
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn training_residual_norm(&self) -> f64 {
        self.training_residual_norm
    }

    pub fn index_set(&self) -> IndexSet {
        enumerate_indices(self.dim(), self.degree).expect("n >= 1")
    }

    /// `U^T x` for each row of `points`.
    pub fn project(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(points)?;
        Ok(points * self.subspace.matrix())
    }

    /// `g(U^T x_i)` for each row of `points` (`K x m`).
    pub fn evaluate(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_width(points)?;
        if points.nrows() == 0 {
            return Ok(DVector::zeros(0));
        }
        let coords = normalized_coordinates(points, &self.subspace, &self.affine);
        Ok(self.evaluate_normalized(&coords))
    }

    /// `g` at raw projected coordinates `y` (rows of a `K x n` matrix).
    pub fn evaluate_projected(&self, projected: &DMatrix<f64>) -> Result<DVector<f64>> {
        if projected.ncols() != self.dim() {
            return Err(RidgeError::DimensionMismatch(format!(
                "projected points have {} columns, model has n = {}",
                projected.ncols(),
                self.dim()
            )));
        }
        let mut z = projected.clone();
        for (k, mut col) in z.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = self.affine.apply_coord(k, *v);
            }
        }
        Ok(self.evaluate_normalized(&z))
    }

    fn evaluate_normalized(&self, coords: &DMatrix<f64>) -> DVector<f64> {
        let v = design_from_coordinates(coords, &self.index_set(), self.family);
        v * &self.coefficients
    }

    fn check_width(&self, points: &DMatrix<f64>) -> Result<()> {
        if points.ncols() != self.ambient_dim() {
            return Err(RidgeError::DimensionMismatch(format!(
                "points have {} columns, model expects m = {}",
                points.ncols(),
                self.ambient_dim()
            )));
        }
        Ok(())
    }
}

/// Evaluates `model` at each row of `points`.
pub fn evaluate_model(model: &RidgeModel, points: &DMatrix<f64>) -> Result<DVector<f64>> {
    model.evaluate(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::random_subspace_seeded;

    #[test]
    fn constant_term_only() {
        let u = random_subspace_seeded(4, 2, 1).unwrap();
        let mut c = DVector::zeros(6);
        c[0] = 1.0;
        let model =
            RidgeModel::new(2, BasisFamily::Legendre, u, AffineMap::identity(2), c, 0.0).unwrap();
        let x = DMatrix::from_fn(5, 4, |i, j| (i * 4 + j) as f64 * 0.1 - 0.7);
        assert!(model.evaluate(&x).unwrap().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn invariant_along_complement() {
        let u = random_subspace_seeded(5, 2, 2).unwrap();
        let c = DVector::from_fn(10, |j, _| (j as f64 + 1.0).recip());
        let model = RidgeModel::new(
            3,
            BasisFamily::Hermite,
            u.clone(),
            AffineMap::identity(2),
            c,
            0.0,
        )
        .unwrap();
        let x = DMatrix::from_fn(3, 5, |i, j| ((i + 2 * j) as f64).sin());
        let w = u.complement_project(&DMatrix::from_fn(5, 1, |i, _| i as f64 - 2.0));
        let mut shifted = x.clone();
        for mut row in shifted.row_iter_mut() {
            for j in 0..5 {
                row[j] += w[(j, 0)];
            }
        }
        let a = model.evaluate(&x).unwrap();
        let b = model.evaluate(&shifted).unwrap();
        assert!((a - b).amax() <= 1e-12);
    }

    #[test]
    fn width_and_coefficient_checks() {
        let u = random_subspace_seeded(3, 1, 3).unwrap();
        assert!(RidgeModel::new(
            2,
            BasisFamily::Legendre,
            u.clone(),
            AffineMap::identity(1),
            DVector::zeros(4),
            0.0
        )
        .is_err());
        let model = RidgeModel::new(
            2,
            BasisFamily::Legendre,
            u,
            AffineMap::identity(1),
            DVector::zeros(3),
            0.0,
        )
        .unwrap();
        assert!(matches!(
            model.evaluate(&DMatrix::zeros(2, 4)),
            Err(RidgeError::DimensionMismatch(_))
        ));
        assert_eq!(model.evaluate(&DMatrix::zeros(0, 3)).unwrap().len(), 0);
    }
}
