//! Variable projection: for fixed `U` the coefficients are the minimum-norm
//! least-squares solution `c = V(U)^+ f`, leaving a residual `r(U)` that
//! depends on `U` alone. This module computes that residual, its Jacobian
//! with respect to `U` (full Golub-Pereyra form), and the gradient of
//! `0.5 * ||r(U)||^2`.

use nalgebra::{DMatrix, DVector};

use crate::basis::{enumerate_indices, fit_affine_map, BasisFamily};
use crate::error::{Result, RidgeError};
use crate::grassmann::Subspace;
use crate::linalg::thin_svd;
use crate::vandermonde::{build_design, build_design_derivative, DesignMatrix};

/// Samples `x_i` (rows of an `M x m` matrix), values `f_i`, and the
/// polynomial space to fit.
#[derive(Debug, Clone)]
pub struct ProjectedProblem {
    points: DMatrix<f64>,
    values: DVector<f64>,
    degree: usize,
    family: BasisFamily,
}

impl ProjectedProblem {
    /// Rejects empty data, mismatched lengths, and any non-finite entry.
    pub fn new(
        points: DMatrix<f64>,
        values: DVector<f64>,
        degree: usize,
        family: BasisFamily,
    ) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(RidgeError::InvalidArgument(format!(
                "need at least one sample and one input dimension, got {}x{}",
                points.nrows(),
                points.ncols()
            )));
        }
        if points.nrows() != values.len() {
            return Err(RidgeError::DimensionMismatch(format!(
                "{} sample points but {} values",
                points.nrows(),
                values.len()
            )));
        }
        for i in 0..points.nrows() {
            for j in 0..points.ncols() {
                if !points[(i, j)].is_finite() {
                    return Err(RidgeError::NonFinite {
                        what: "points",
                        row: i,
                        col: j,
                    });
                }
            }
            if !values[i].is_finite() {
                return Err(RidgeError::NonFinite {
                    what: "values",
                    row: i,
                    col: 0,
                });
            }
        }
        Ok(ProjectedProblem {
            points,
            values,
            degree,
            family,
        })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn num_samples(&self) -> usize {
        self.points.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn with_family(&self, family: BasisFamily) -> Self {
        ProjectedProblem {
            family,
            ..self.clone()
        }
    }
}

/// Everything derived from one thin SVD of `V(U)`.
#[derive(Debug, Clone)]
pub struct VarproState {
    pub u: Subspace,
    pub design: DesignMatrix,
    pub coefficients: DVector<f64>,
    pub residual: DVector<f64>,
    /// Numerical rank of the design.
    pub rank: usize,
    // Retained factors V = Q diag(sigma) W^T
    range_basis: DMatrix<f64>,
    sigma: DVector<f64>,
    right: DMatrix<f64>,
}

impl VarproState {
    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }

    /// `rank < N`: fewer independent rows than basis functions (or a
    /// degenerate projection).
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.design.values.ncols()
    }

    pub fn fitted_values(&self) -> DVector<f64> {
        &self.design.values * &self.coefficients
    }

    /// Orthonormal basis for the numerical range of `V`.
    pub fn range_basis(&self) -> &DMatrix<f64> {
        &self.range_basis
    }

    /// `P_perp z = z - Q (Q^T z)` for every column of `z`.
    pub fn complement_project(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        z - &self.range_basis * self.range_basis.tr_mul(z)
    }

    /// `(V^+)^T z = Q diag(1/sigma) W^T z` for every column of `z`.
    pub fn pinv_transpose_mul(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut tmp = self.right.tr_mul(z);
        for (i, mut row) in tmp.row_iter_mut().enumerate() {
            row.scale_mut(1.0 / self.sigma[i]);
        }
        &self.range_basis * tmp
    }
}

/// Singular values at or below `max(M, N) * eps * sigma_1` count as zero.
pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Fits the affine normalization at `u`, builds `V(U)`, and solves for the
/// minimum-norm coefficients and the residual.
pub fn solve_coefficients(problem: &ProjectedProblem, u: &Subspace) -> Result<VarproState> {
    if u.ambient_dim() != problem.ambient_dim() {
        return Err(RidgeError::DimensionMismatch(format!(
            "subspace lives in R^{} but samples are in R^{}",
            u.ambient_dim(),
            problem.ambient_dim()
        )));
    }
    let index_set = enumerate_indices(u.dim(), problem.degree)?;
    let projected = &problem.points * u.matrix();
    let affine = fit_affine_map(problem.family, &projected)?;
    let design = build_design(&problem.points, u, &index_set, problem.family, &affine)?;
    if design.values.iter().any(|v| !v.is_finite()) {
        return Err(RidgeError::NonFinite {
            what: "design matrix",
            row: 0,
            col: 0,
        });
    }
    let (rows, cols) = design.values.shape();

    let svd = thin_svd(&design.values)?;
    let sv = svd.sigma;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let thresh = rank_threshold(rows, cols, smax);
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|s| **s > thresh).count()
    };

    let range_basis = svd.u.columns(0, rank).into_owned();
    let right = svd.v.columns(0, rank).into_owned();
    let sigma = DVector::from_iterator(rank, sv.iter().take(rank).copied());

    let mut proj = range_basis.tr_mul(&problem.values);
    for i in 0..rank {
        proj[i] /= sigma[i];
    }
    let coefficients = &right * proj;
    let residual = &problem.values - &design.values * &coefficients;

    Ok(VarproState {
        u: u.clone(),
        design,
        coefficients,
        residual,
        rank,
        range_basis,
        sigma,
        right,
    })
}

/// `d r_i / d U[j, k]` for every sample, stored flattened as an
/// `M x (m n)` matrix with column `j + k m` (row index of `U` fastest).
#[derive(Debug, Clone)]
pub struct JacobianTensor {
    m: usize,
    n: usize,
    flat: DMatrix<f64>,
}

impl JacobianTensor {
    pub fn from_flat(m: usize, n: usize, flat: DMatrix<f64>) -> Result<Self> {
        if flat.ncols() != m * n {
            return Err(RidgeError::DimensionMismatch(format!(
                "flattened Jacobian has {} columns, expected m*n = {}",
                flat.ncols(),
                m * n
            )));
        }
        Ok(JacobianTensor { m, n, flat })
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_samples(&self) -> usize {
        self.flat.nrows()
    }

    pub fn flat(&self) -> &DMatrix<f64> {
        &self.flat
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.flat[(i, j + k * self.m)]
    }

    /// The `m x n` slice `J_i`.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_iterator(self.m, self.n, self.flat.row(i).iter().copied())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.flat.norm()
    }

    /// `(vec J) vec(D)` for an `m x n` direction `D`.
    pub fn apply(&self, direction: &DMatrix<f64>) -> DVector<f64> {
        let v = DVector::from_column_slice(direction.as_slice());
        &self.flat * v
    }
}

/// Golub-Pereyra Jacobian of the variable-projection residual:
/// `J[:, j, k] = -(P_perp dV c + (V^+)^T dV^T r)` with `dV = dV/dU[j, k]`
/// and the affine normalization held fixed.
pub fn jacobian(problem: &ProjectedProblem, state: &VarproState) -> Result<JacobianTensor> {
    if state.rank == 0 {
        return Err(RidgeError::RankZero);
    }
    let m = problem.ambient_dim();
    let n = state.u.dim();
    let rows = problem.num_samples();
    let d = build_design_derivative(
        &problem.points,
        &state.u,
        &state.design.index_set,
        state.design.family,
        &state.design.affine,
    )?;
    let x = &problem.points;

    // diag(r) X is shared by every l
    let mut rx = x.clone();
    for (i, mut row) in rx.row_iter_mut().enumerate() {
        row.scale_mut(state.residual[i]);
    }

    let mut flat = DMatrix::zeros(rows, m * n);
    for l in 0..n {
        let partial = d.partial(l);
        // dV/dU[k,l] c = x_{:,k} .* (D_l c)
        let dc = partial * &state.coefficients;
        let mut w = x.clone();
        for (i, mut row) in w.row_iter_mut().enumerate() {
            row.scale_mut(dc[i]);
        }
        let first = state.complement_project(&w);
        // dV/dU[k,l]^T r = D_l^T (x_{:,k} .* r)
        let second = state.pinv_transpose_mul(&partial.tr_mul(&rx));
        let block = -(first + second);
        flat.columns_mut(l * m, m).copy_from(&block);
    }
    JacobianTensor::from_flat(m, n, flat)
}

/// `G = sum_i J_i r_i`, the gradient of `0.5 ||r(U)||^2`.
pub fn gradient(jac: &JacobianTensor, residual: &DVector<f64>) -> Result<DMatrix<f64>> {
    if residual.len() != jac.num_samples() {
        return Err(RidgeError::DimensionMismatch(format!(
            "residual has length {} but the Jacobian has {} rows",
            residual.len(),
            jac.num_samples()
        )));
    }
    let g = jac.flat.tr_mul(residual);
    Ok(DMatrix::from_column_slice(jac.m, jac.n, g.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::AffineMap;
    use crate::grassmann::random_subspace_seeded;
    use crate::vandermonde::design_from_coordinates;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(
        rows: usize,
        m: usize,
        p: usize,
        fam: BasisFamily,
        seed: u64,
    ) -> ProjectedProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(rows, m, |_, _| rng.random_range(-1.0..1.0));
        let f = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        ProjectedProblem::new(x, f, p, fam).unwrap()
    }

    // Residual r(U) with U perturbed as a raw matrix and the affine map fixed.
    fn residual_fixed_affine(
        problem: &ProjectedProblem,
        umat: &DMatrix<f64>,
        aff: &AffineMap,
    ) -> DVector<f64> {
        let set = enumerate_indices(umat.ncols(), problem.degree()).unwrap();
        let mut z = problem.points() * umat;
        for (k, mut col) in z.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = aff.apply_coord(k, *v);
            }
        }
        let v = design_from_coordinates(&z, &set, problem.family());
        // independent least-squares route: normal equations via QR
        let qr = v.clone().qr();
        let c = qr
            .r()
            .solve_upper_triangular(&(qr.q().transpose() * problem.values()))
            .unwrap();
        problem.values() - v * c
    }

    #[test]
    fn constant_data_has_zero_residual() {
        let mut p = random_problem(30, 4, 3, BasisFamily::Legendre, 1);
        p.values = DVector::from_element(30, 5.0);
        for n in 1..=2 {
            let u = random_subspace_seeded(4, n, 2).unwrap();
            let s = solve_coefficients(&p, &u).unwrap();
            assert!(s.residual_norm() <= 1e-12);
            assert!(s.fitted_values().iter().all(|v| (v - 5.0).abs() < 1e-12));
        }
    }

    #[test]
    fn inner_solve_is_optimal() {
        for fam in BasisFamily::ALL {
            let p = random_problem(40, 5, 3, fam, 3);
            let u = random_subspace_seeded(5, 2, 4).unwrap();
            let s = solve_coefficients(&p, &u).unwrap();
            let vtr = s.design.values.tr_mul(&s.residual);
            assert!(
                vtr.amax() <= 1e-8 * p.values().norm(),
                "{fam}: {}",
                vtr.amax()
            );

            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let base = s.residual_norm();
            for _ in 0..20 {
                let mut delta =
                    DVector::from_fn(s.coefficients.len(), |_, _| rng.random_range(-1.0..1.0));
                delta *= 1e-3 / delta.norm();
                let perturbed = p.values() - &s.design.values * (&s.coefficients + delta);
                assert!(perturbed.norm() > base);
            }
        }
    }

    #[test]
    fn underdetermined_is_flagged() {
        let p = random_problem(4, 3, 3, BasisFamily::Legendre, 6);
        let u = random_subspace_seeded(3, 2, 7).unwrap();
        let s = solve_coefficients(&p, &u).unwrap();
        assert!(s.is_rank_deficient());
        assert!(s.rank <= 4);
    }

    #[test]
    fn non_finite_rejected() {
        let x = DMatrix::from_element(3, 2, 0.5);
        let f = DVector::from_column_slice(&[1.0, f64::NAN, 0.0]);
        assert!(matches!(
            ProjectedProblem::new(x, f, 2, BasisFamily::Legendre),
            Err(RidgeError::NonFinite {
                what: "values",
                row: 1,
                ..
            })
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let h = 1e-6;
        for (rows, m, n, deg) in [(5, 3, 2, 1), (12, 4, 2, 2), (15, 4, 1, 3)] {
            for fam in BasisFamily::ALL {
                let p = random_problem(rows, m, deg, fam, 8 + rows as u64);
                let u = random_subspace_seeded(m, n, 9).unwrap();
                let s = solve_coefficients(&p, &u).unwrap();
                let jac = jacobian(&p, &s).unwrap();
                let scale = jac.frobenius_norm().max(1e-300);
                for j in 0..m {
                    for k in 0..n {
                        let mut up = u.matrix().clone();
                        up[(j, k)] += h;
                        let mut dn = u.matrix().clone();
                        dn[(j, k)] -= h;
                        let fd = (residual_fixed_affine(&p, &up, &s.design.affine)
                            - residual_fixed_affine(&p, &dn, &s.design.affine))
                            / (2.0 * h);
                        for i in 0..rows {
                            let err = (fd[i] - jac.get(i, j, k)).abs();
                            assert!(
                                err <= 1e-5 * scale,
                                "{fam} i={i} j={j} k={k} fd={} exact={}",
                                fd[i],
                                jac.get(i, j, k)
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn slices_orthogonal_to_subspace() {
        for fam in BasisFamily::ALL {
            for n in 1..=3 {
                for deg in 1..=5 {
                    let p = random_problem(60, 6, deg, fam, (n * 7 + deg) as u64);
                    let u = random_subspace_seeded(6, n, (n * 13 + deg) as u64).unwrap();
                    let s = solve_coefficients(&p, &u).unwrap();
                    let jac = jacobian(&p, &s).unwrap();
                    let total = jac.frobenius_norm();
                    let worst = (0..60)
                        .map(|i| u.matrix().tr_mul(&jac.slice(i)).norm())
                        .fold(0.0, f64::max);
                    assert!(
                        worst <= 1e-8 * total,
                        "{fam} n={n} p={deg}: {worst} vs {total}"
                    );
                    let g = gradient(&jac, &s.residual).unwrap();
                    assert!(u.matrix().tr_mul(&g).amax() <= 1e-8 * (1.0 + g.norm()));
                }
            }
        }
    }

    #[test]
    fn nullspace_contains_u_times_s() {
        let p = random_problem(50, 5, 3, BasisFamily::Legendre, 20);
        let u = random_subspace_seeded(5, 2, 21).unwrap();
        let s = solve_coefficients(&p, &u).unwrap();
        let jac = jacobian(&p, &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..5 {
            let sm = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let us = u.matrix() * &sm;
            let out = jac.apply(&us);
            assert!(out.norm() <= 1e-8 * jac.frobenius_norm() * sm.norm());
        }
    }

    #[test]
    fn gradient_matches_objective_differences() {
        let h = 1e-6;
        let p = random_problem(6, 2, 3, BasisFamily::Legendre, 30);
        let u = random_subspace_seeded(2, 1, 31).unwrap();
        let s = solve_coefficients(&p, &u).unwrap();
        let jac = jacobian(&p, &s).unwrap();
        let g = gradient(&jac, &s.residual).unwrap();
        for j in 0..2 {
            let mut up = u.matrix().clone();
            up[(j, 0)] += h;
            let mut dn = u.matrix().clone();
            dn[(j, 0)] -= h;
            let phi = |um: &DMatrix<f64>| {
                0.5 * residual_fixed_affine(&p, um, &s.design.affine).norm_squared()
            };
            let fd = (phi(&up) - phi(&dn)) / (2.0 * h);
            assert!(
                (fd - g[(j, 0)]).abs() <= 1e-4 * g.norm().max(1e-8),
                "fd={fd} g={}",
                g[(j, 0)]
            );
        }
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let x = DMatrix::from_fn(50, 4, |_, _| rng.random_range(-1.0..1.0));
        let u = random_subspace_seeded(4, 1, 41).unwrap();
        let y = &x * u.matrix();
        let f = DVector::from_fn(50, |i, _| 1.0 + 2.0 * y[(i, 0)] - y[(i, 0)].powi(2));
        let p = ProjectedProblem::new(x, f, 2, BasisFamily::Legendre).unwrap();
        let s = solve_coefficients(&p, &u).unwrap();
        assert!(s.residual_norm() <= 1e-10 * p.values().norm());
        let g = gradient(&jacobian(&p, &s).unwrap(), &s.residual).unwrap();
        assert!(g.amax() <= 1e-9);
        let zero = DVector::zeros(50);
        assert!(gradient(&jacobian(&p, &s).unwrap(), &zero)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn predictions_invariant_under_rotation() {
        let p = random_problem(40, 5, 3, BasisFamily::Legendre, 50);
        let u = random_subspace_seeded(5, 2, 51).unwrap();
        let th = 0.7f64;
        let q = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let uq = Subspace::new(u.matrix() * q).unwrap();
        let a = solve_coefficients(&p, &u).unwrap().fitted_values();
        let b = solve_coefficients(&p, &uq).unwrap().fitted_values();
        assert!((a - b).amax() <= 1e-8);
    }
}
