//! Points and tangent directions on the Grassmann manifold of `n`-dimensional
//! subspaces of `R^m`, represented by `m x n` matrices with orthonormal columns.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, RidgeError};
use crate::linalg::{singular_values, thin_svd};

/// Orthonormality deviation accepted as-is.
pub const ORTHO_TOL: f64 = 1e-12;
/// Orthonormality deviation repaired by re-orthonormalization; beyond this the
/// matrix is rejected.
pub const ORTHO_REPAIR_TOL: f64 = 1e-8;

/// Relative size below which a singular value of a direction counts as zero.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

/// An `m x n` matrix with orthonormal columns, `1 <= n <= m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps `basis`, re-orthonormalizing small drift (up to
    /// [`ORTHO_REPAIR_TOL`]) and rejecting anything worse.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (m, n) = basis.shape();
        if n == 0 || n > m {
            return Err(RidgeError::InvalidArgument(format!(
                "subspace basis must satisfy 1 <= n <= m, got {m}x{n}"
            )));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(RidgeError::NotOrthonormal(f64::NAN));
        }
        let dev = orthonormality_error(&basis);
        if dev <= ORTHO_TOL {
            Ok(Subspace { basis })
        } else if dev <= ORTHO_REPAIR_TOL {
            Ok(Subspace {
                basis: orthonormalize(basis),
            })
        } else {
            Err(RidgeError::NotOrthonormal(dev))
        }
    }

    /// Orthonormal basis for the span of the columns of `spanning` (which must
    /// have full column rank).
    pub fn from_span(spanning: DMatrix<f64>) -> Result<Self> {
        let (m, n) = spanning.shape();
        if n == 0 || n > m {
            return Err(RidgeError::InvalidArgument(format!(
                "spanning set must satisfy 1 <= n <= m, got {m}x{n}"
            )));
        }
        let q = orthonormalize(spanning);
        Subspace::new(q)
    }

    // Geodesic points are orthonormal up to roundoff; repair anything that is
    // not rather than failing mid-iteration.
    fn from_iterate(basis: DMatrix<f64>) -> Self {
        if orthonormality_error(&basis) <= ORTHO_TOL {
            Subspace { basis }
        } else {
            Subspace {
                basis: orthonormalize(basis),
            }
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.basis
    }

    /// `P = I - U U^T` applied to `g`.
    pub fn complement_project(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let coeffs = self.basis.tr_mul(g);
        g - &self.basis * coeffs
    }
}

/// `max |U^T U - I|` over all entries.
pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let gram = u.tr_mul(u);
    let n = gram.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

fn orthonormalize(a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    // keep the sign of each column aligned with the input
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A tangent direction `Delta` at some `U`, meaning `U^T Delta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDirection {
    delta: DMatrix<f64>,
}

impl TangentDirection {
    /// Checks `max |U^T Delta| <= 1e-10 * max(1, ||Delta||_F)`.
    pub fn new(u: &Subspace, delta: DMatrix<f64>) -> Result<Self> {
        if delta.shape() != u.matrix().shape() {
            return Err(RidgeError::DimensionMismatch(format!(
                "tangent direction is {:?} but subspace is {:?}",
                delta.shape(),
                u.matrix().shape()
            )));
        }
        let err = u.matrix().tr_mul(&delta).amax();
        if err > 1e-10 * delta.norm().max(1.0) {
            return Err(RidgeError::InvalidArgument(format!(
                "direction is not tangent: max |U^T Delta| = {err:.3e}"
            )));
        }
        Ok(TangentDirection { delta })
    }

    /// Wraps a direction that is tangent by construction (projected, or a
    /// pseudoinverse solution whose row space excludes `range(I ⊗ U)`).
    pub(crate) fn trusted(delta: DMatrix<f64>) -> Self {
        TangentDirection { delta }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        TangentDirection {
            delta: DMatrix::zeros(m, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.delta
    }

    pub fn norm(&self) -> f64 {
        self.delta.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.delta.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        TangentDirection {
            delta: &self.delta * s,
        }
    }
}

/// Haar-uniform random subspace: thin QR of an `m x n` standard normal matrix.
pub fn random_subspace<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Subspace> {
    if n == 0 || n > m {
        return Err(RidgeError::InvalidArgument(format!(
            "random subspace needs 1 <= n <= m, got m={m}, n={n}"
        )));
    }
    let z = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Subspace::from_span(z)
}

/// [`random_subspace`] driven by a fresh generator seeded with `seed`.
pub fn random_subspace_seeded(m: usize, n: usize, seed: u64) -> Result<Subspace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_subspace(m, n, &mut rng)
}

/// Geodesic through `U0` with initial velocity `Delta`, with the thin SVD of
/// `Delta` factored once so repeated evaluations (line search) are cheap.
#[derive(Debug, Clone)]
pub struct Geodesic {
    start: Subspace,
    // U0 Z, Y, sigma and Z^T from Delta = Y diag(sigma) Z^T
    start_z: DMatrix<f64>,
    left: DMatrix<f64>,
    sigma: DVector<f64>,
    right_t: DMatrix<f64>,
    stationary: bool,
}

impl Geodesic {
    pub fn new(start: &Subspace, delta: &TangentDirection) -> Result<Self> {
        if delta.matrix().shape() != start.matrix().shape() {
            return Err(RidgeError::DimensionMismatch(format!(
                "direction is {:?} but subspace is {:?}",
                delta.matrix().shape(),
                start.matrix().shape()
            )));
        }
        let n = start.dim();
        if delta.is_zero() {
            return Ok(Geodesic {
                start: start.clone(),
                start_z: start.matrix().clone(),
                left: DMatrix::zeros(start.ambient_dim(), n),
                sigma: DVector::zeros(n),
                right_t: DMatrix::identity(n, n),
                stationary: true,
            });
        }
        let svd = thin_svd(delta.matrix())?;
        let mut left = svd.u;
        let right_t = svd.v.transpose();
        let mut sigma = svd.sigma;
        // Left vectors paired with roundoff-level singular values are
        // arbitrary and need not be orthogonal to U0; drop them.
        let cutoff = SINGULAR_CUTOFF * sigma.amax();
        for (j, s) in sigma.iter_mut().enumerate() {
            if *s <= cutoff {
                *s = 0.0;
                left.column_mut(j).fill(0.0);
            }
        }
        let start_z = start.matrix() * right_t.transpose();
        Ok(Geodesic {
            start: start.clone(),
            start_z,
            left,
            sigma,
            right_t,
            stationary: false,
        })
    }

    /// `U(t) = U0 Z cos(Sigma t) Z^T + Y sin(Sigma t) Z^T`.
    pub fn at(&self, t: f64) -> Subspace {
        if t == 0.0 || self.stationary {
            return self.start.clone();
        }
        Subspace::from_iterate(self.matrix_at(t))
    }

    /// The formula evaluated without any orthonormality repair.
    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        if t == 0.0 || self.stationary {
            return self.start.matrix().clone();
        }
        let mut a = self.start_z.clone();
        let mut b = self.left.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            let (sin, cos) = (s * t).sin_cos();
            a.column_mut(j).scale_mut(cos);
            b.column_mut(j).scale_mut(sin);
        }
        (a + b) * &self.right_t
    }

    /// Largest rotation angle swept per unit `t` (`||Delta||_2`).
    pub fn speed(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }
}

/// Point at parameter `t` along the geodesic from `u0` in direction `delta`.
pub fn geodesic(u0: &Subspace, delta: &TangentDirection, t: f64) -> Result<Subspace> {
    Ok(Geodesic::new(u0, delta)?.at(t))
}

/// `(I - U U^T) G` as a tangent direction at `U`.
pub fn tangent_project(u: &Subspace, g: &DMatrix<f64>) -> Result<TangentDirection> {
    if g.shape() != u.matrix().shape() {
        return Err(RidgeError::DimensionMismatch(format!(
            "matrix is {:?} but subspace is {:?}",
            g.shape(),
            u.matrix().shape()
        )));
    }
    Ok(TangentDirection::trusted(u.complement_project(g)))
}

/// Principal angles between two subspaces, ascending, in radians.
///
/// Each angle is `atan2(sin, cos)` with the cosines from the singular values
/// of `U1^T U2` (clamped into `[-1, 1]`) and the sines from the singular
/// values of `(I - U1 U1^T) U2`, which keeps small angles accurate where
/// `acos` alone bottoms out near `1e-8`.
pub fn principal_angles(u1: &Subspace, u2: &Subspace) -> Result<Vec<f64>> {
    if u1.matrix().shape() != u2.matrix().shape() {
        return Err(RidgeError::DimensionMismatch(format!(
            "subspaces have shapes {:?} and {:?}",
            u1.matrix().shape(),
            u2.matrix().shape()
        )));
    }
    let n = u1.dim();
    let cross = u1.matrix().tr_mul(u2.matrix());
    // descending cosines pair with ascending sines
    let mut cos: Vec<f64> = singular_values(&cross)?
        .iter()
        .map(|c| c.clamp(-1.0, 1.0))
        .collect();
    cos.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let resid = u1.complement_project(u2.matrix());
    let mut sin: Vec<f64> = singular_values(&resid)?
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sin.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let angles = (0..n)
        .map(|i| sin[i].atan2(cos[i]).clamp(0.0, std::f64::consts::FRAC_PI_2))
        .collect();
    Ok(angles)
}

/// Largest principal angle between the spans, in `[0, pi/2]`.
pub fn subspace_angle(u1: &Subspace, u2: &Subspace) -> Result<f64> {
    Ok(*principal_angles(u1, u2)?.last().expect("n >= 1"))
}

/// Smallest principal angle between the spans, in `[0, pi/2]`.
pub fn smallest_subspace_angle(u1: &Subspace, u2: &Subspace) -> Result<f64> {
    Ok(principal_angles(u1, u2)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_tangent(u: &Subspace, seed: u64) -> TangentDirection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(u.ambient_dim(), u.dim(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        tangent_project(u, &g).unwrap()
    }

    #[test]
    fn random_subspace_is_orthonormal() {
        for seed in 0..20 {
            let u = random_subspace_seeded(12, 3, seed).unwrap();
            assert!(orthonormality_error(u.matrix()) <= 1e-12);
        }
        assert!(random_subspace_seeded(3, 4, 0).is_err());
        assert_eq!(
            random_subspace_seeded(7, 2, 99).unwrap(),
            random_subspace_seeded(7, 2, 99).unwrap()
        );
    }

    #[test]
    fn full_space_has_zero_angle_to_identity() {
        let u = random_subspace_seeded(5, 5, 3).unwrap();
        let id = Subspace::new(DMatrix::identity(5, 5)).unwrap();
        assert!(subspace_angle(&u, &id).unwrap() <= 1e-12);
    }

    #[test]
    fn distinct_seeds_give_distinct_lines() {
        for s in 0..100u64 {
            let a = random_subspace_seeded(10, 1, 2 * s).unwrap();
            let b = random_subspace_seeded(10, 1, 2 * s + 1).unwrap();
            assert!(subspace_angle(&a, &b).unwrap() > 1e-6);
        }
    }

    #[test]
    fn subspace_constructor_repairs_and_rejects() {
        let mut m = DMatrix::identity(4, 2);
        m[(0, 0)] += 1e-10;
        let s = Subspace::new(m).unwrap();
        assert!(orthonormality_error(s.matrix()) <= 1e-12);
        let mut m = DMatrix::identity(4, 2);
        m[(0, 0)] += 1e-4;
        assert!(matches!(
            Subspace::new(m),
            Err(RidgeError::NotOrthonormal(_))
        ));
        assert!(Subspace::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn geodesic_start_and_stationary() {
        let u = random_subspace_seeded(8, 2, 1).unwrap();
        let d = random_tangent(&u, 2);
        assert_eq!(geodesic(&u, &d, 0.0).unwrap(), u);
        let zero = TangentDirection::zeros(8, 2);
        for t in [0.0, 0.3, 5.0] {
            assert_eq!(geodesic(&u, &zero, t).unwrap(), u);
        }
    }

    #[test]
    fn geodesic_half_turn_for_a_line() {
        let u = random_subspace_seeded(6, 1, 4).unwrap();
        let d = random_tangent(&u, 5);
        let sigma = d.norm();
        let end = geodesic(&u, &d, PI / sigma).unwrap();
        for i in 0..6 {
            assert_relative_eq!(end.matrix()[(i, 0)], -u.matrix()[(i, 0)], epsilon = 1e-12);
        }
        assert!(subspace_angle(&end, &u).unwrap() <= 1e-10);
    }

    #[test]
    fn geodesic_stays_orthonormal() {
        for seed in 0..10 {
            let u = random_subspace_seeded(9, 3, seed).unwrap();
            let d = random_tangent(&u, seed + 100);
            let g = Geodesic::new(&u, &d).unwrap();
            for k in 0..=20 {
                let t = 0.5 * k as f64;
                assert!(orthonormality_error(g.at(t).matrix()) <= 1e-10);
            }
        }
    }

    #[test]
    fn geodesic_speed_bound_and_tangent() {
        let u = random_subspace_seeded(7, 2, 11).unwrap();
        let d = random_tangent(&u, 12);
        let d = d.scaled(1.0 / d.norm());
        let g = Geodesic::new(&u, &d).unwrap();
        for t in [1e-4, 1e-3, 1e-2, 0.1] {
            let ang = subspace_angle(&g.at(t), &u).unwrap();
            assert!(ang <= g.speed() * t + 1e-8);
        }
        let h = 1e-5;
        let fd = (g.at(h).into_matrix() - u.matrix()) / h;
        let err = (&fd - d.matrix()).amax();
        assert!(err <= 1e-4 * d.matrix().amax(), "err={err}");
    }

    #[test]
    fn projection_properties() {
        let u = random_subspace_seeded(10, 3, 21).unwrap();
        let p = tangent_project(&u, u.matrix()).unwrap();
        assert!(p.matrix().amax() <= 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let g = DMatrix::from_fn(10, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = tangent_project(&u, &g).unwrap();
            assert!(u.matrix().tr_mul(p.matrix()).amax() <= 1e-12 * g.norm());
            let pp = tangent_project(&u, p.matrix()).unwrap();
            assert!((pp.matrix() - p.matrix()).amax() <= 1e-14 * g.norm());
            assert!(TangentDirection::new(&u, p.into_matrix()).is_ok());
        }
        assert!(TangentDirection::new(&u, u.matrix().clone()).is_err());
    }

    #[test]
    fn angle_examples() {
        let u = random_subspace_seeded(6, 2, 30).unwrap();
        assert!(subspace_angle(&u, &u).unwrap() <= 1e-12);
        let e1 = Subspace::new(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        let e2 = Subspace::new(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0])).unwrap();
        assert_relative_eq!(
            subspace_angle(&e1, &e2).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-15
        );

        let theta = 0.3f64;
        let q =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let uq = Subspace::new(u.matrix() * q).unwrap();
        assert!(subspace_angle(&u, &uq).unwrap() <= 1e-12);
    }

    #[test]
    fn small_angles_resolved() {
        let a = Subspace::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        for theta in [1e-12f64, 1e-9, 1e-6] {
            let b = Subspace::new(DMatrix::from_column_slice(
                2,
                1,
                &[theta.cos(), theta.sin()],
            ))
            .unwrap();
            assert_relative_eq!(subspace_angle(&a, &b).unwrap(), theta, max_relative = 1e-6);
        }
    }

    #[test]
    fn angles_symmetric() {
        for seed in 0..10 {
            let a = random_subspace_seeded(8, 3, seed).unwrap();
            let b = random_subspace_seeded(8, 3, seed + 50).unwrap();
            let ab = principal_angles(&a, &b).unwrap();
            let ba = principal_angles(&b, &a).unwrap();
            for (x, y) in ab.iter().zip(&ba) {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
            assert!(ab.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        }
    }
}
