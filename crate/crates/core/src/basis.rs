//! Total-degree multi-indices, one-dimensional polynomial families, and the
//! affine normalization applied to projected coordinates before evaluation.
//!
//! A multivariate basis element is the tensor product
//! `psi_j(y) = prod_k phi_{alpha_j[k]}(eta(y)_k)` where `alpha_j` runs over an
//! [`IndexSet`] and `eta` is an [`AffineMap`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, RidgeError};

/// Spread below which a projected coordinate is treated as constant.
pub const DEGENERATE_SPREAD: f64 = 1e-14;

/// Exponents of one tensor-product basis element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponents(&self) -> &[usize] {
        &self.0
    }
}

/// All length-`n` multi-indices of total degree at most `p`, in graded
/// lexicographic order.
///
/// Within one total degree, indices are ordered lexicographically with larger
/// leading exponents first, so for `n = 2, p = 2` the order is
/// `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    n: usize,
    p: usize,
    indices: Vec<MultiIndex>,
}

impl IndexSet {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }
}

/// Enumerates every multi-index of length `n` and total degree `<= p`.
///
/// Fails only for `n = 0`.
pub fn enumerate_indices(n: usize, p: usize) -> Result<IndexSet> {
    if n == 0 {
        return Err(RidgeError::InvalidArgument(
            "multi-index length n must be at least 1".into(),
        ));
    }
    let mut indices = Vec::with_capacity(binomial(n + p, p));
    let mut scratch = vec![0usize; n];
    for total in 0..=p {
        push_compositions(total, 0, &mut scratch, &mut indices);
    }
    Ok(IndexSet { n, p, indices })
}

// Writes every composition of `remaining` into scratch[pos..], leading
// exponents descending.
fn push_compositions(
    remaining: usize,
    pos: usize,
    scratch: &mut [usize],
    out: &mut Vec<MultiIndex>,
) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for head in (0..=remaining).rev() {
        scratch[pos] = head;
        push_compositions(remaining - head, pos + 1, scratch, out);
    }
}

/// Binomial coefficient `C(n, k)`; exact for the sizes used here.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// One-dimensional polynomial family used in every tensor-product factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    /// `phi_k(y) = y^k`
    Monomial,
    /// Legendre polynomials normalized so `phi_k(1) = 1`.
    Legendre,
    /// Probabilists' Hermite polynomials (weight `exp(-y^2/2)`).
    Hermite,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 3] = [
        BasisFamily::Monomial,
        BasisFamily::Legendre,
        BasisFamily::Hermite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BasisFamily::Monomial => "monomial",
            BasisFamily::Legendre => "legendre",
            BasisFamily::Hermite => "hermite",
        }
    }

    /// Fills `out[k] = phi_k(y)` for `k = 0..out.len()`.
    pub fn fill_values(&self, y: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = y;
        for k in 1..out.len() - 1 {
            let kf = k as f64;
            out[k + 1] = match self {
                BasisFamily::Monomial => out[k] * y,
                BasisFamily::Legendre => {
                    ((2.0 * kf + 1.0) * y * out[k] - kf * out[k - 1]) / (kf + 1.0)
                }
                BasisFamily::Hermite => y * out[k] - kf * out[k - 1],
            };
        }
    }

    /// Fills `values[k] = phi_k(y)` and `derivs[k] = phi_k'(y)`.
    ///
    /// Both slices must have the same length.
    pub fn fill_values_and_derivatives(&self, y: f64, values: &mut [f64], derivs: &mut [f64]) {
        debug_assert_eq!(values.len(), derivs.len());
        self.fill_values(y, values);
        if derivs.is_empty() {
            return;
        }
        derivs[0] = 0.0;
        for k in 1..derivs.len() {
            let kf = k as f64;
            derivs[k] = match self {
                BasisFamily::Monomial | BasisFamily::Hermite => kf * values[k - 1],
                // (k+1) P_{k+1}' = (2k+1)(P_k + y P_k') - k P_{k-1}', shifted down by one.
                BasisFamily::Legendre => {
                    let j = kf - 1.0;
                    let prev2 = if k >= 2 { derivs[k - 2] } else { 0.0 };
                    ((2.0 * j + 1.0) * (values[k - 1] + y * derivs[k - 1]) - j * prev2) / (j + 1.0)
                }
            };
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisFamily {
    type Err = RidgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "monomial" => Ok(BasisFamily::Monomial),
            "legendre" => Ok(BasisFamily::Legendre),
            "hermite" => Ok(BasisFamily::Hermite),
            other => Err(RidgeError::InvalidArgument(format!(
                "unknown basis family '{other}' (expected monomial, legendre or hermite)"
            ))),
        }
    }
}

/// `phi_k(y)` for the given family.
pub fn eval_poly_1d(family: BasisFamily, k: usize, y: f64) -> f64 {
    let mut buf = vec![0.0; k + 1];
    family.fill_values(y, &mut buf);
    buf[k]
}

/// `phi_k'(y)` for the given family.
pub fn eval_poly_1d_deriv(family: BasisFamily, k: usize, y: f64) -> f64 {
    let mut vals = vec![0.0; k + 1];
    let mut ders = vec![0.0; k + 1];
    family.fill_values_and_derivatives(y, &mut vals, &mut ders);
    ders[k]
}

/// Coordinate-wise affine map `eta(y) = a + diag(d) y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    offset: Vec<f64>,
    scale: Vec<f64>,
}

impl AffineMap {
    pub fn new(offset: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if offset.len() != scale.len() {
            return Err(RidgeError::DimensionMismatch(format!(
                "affine offset has length {} but scale has length {}",
                offset.len(),
                scale.len()
            )));
        }
        if offset.is_empty() {
            return Err(RidgeError::InvalidArgument(
                "affine map must have dimension >= 1".into(),
            ));
        }
        if let Some(k) = scale.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(RidgeError::InvalidArgument(format!(
                "affine scale entry {k} must be positive and finite, got {}",
                scale[k]
            )));
        }
        if let Some(k) = offset.iter().position(|a| !a.is_finite()) {
            return Err(RidgeError::NonFinite {
                what: "affine offset",
                row: 0,
                col: k,
            });
        }
        Ok(AffineMap { offset, scale })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap {
            offset: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    #[inline]
    pub fn apply_coord(&self, k: usize, y: f64) -> f64 {
        self.offset[k] + self.scale[k] * y
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(k, v)| self.apply_coord(k, *v))
            .collect()
    }
}

/// Fits the normalization for `projected` (one row per sample, one column per
/// subspace coordinate).
///
/// Legendre and monomial map each column's `[min, max]` onto `[-1, 1]`;
/// Hermite standardizes each column to zero mean and unit (population)
/// standard deviation. A column whose spread is below [`DEGENERATE_SPREAD`]
/// gets unit scale and is centered on its mean.
pub fn fit_affine_map(family: BasisFamily, projected: &DMatrix<f64>) -> Result<AffineMap> {
    let (rows, n) = projected.shape();
    if rows == 0 {
        return Err(RidgeError::InvalidArgument(
            "cannot fit an affine map to zero points".into(),
        ));
    }
    if n == 0 {
        return Err(RidgeError::InvalidArgument(
            "projected points have zero columns".into(),
        ));
    }
    let mut offset = Vec::with_capacity(n);
    let mut scale = Vec::with_capacity(n);
    for col in projected.column_iter() {
        let mean = col.mean();
        let (a, d) = match family {
            BasisFamily::Legendre | BasisFamily::Monomial => {
                let lo = col.min();
                let hi = col.max();
                let spread = hi - lo;
                if spread < DEGENERATE_SPREAD {
                    (-mean, 1.0)
                } else {
                    let d = 2.0 / spread;
                    (-1.0 - d * lo, d)
                }
            }
            BasisFamily::Hermite => {
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows as f64;
                let sd = var.sqrt();
                if sd < DEGENERATE_SPREAD {
                    (-mean, 1.0)
                } else {
                    (-mean / sd, 1.0 / sd)
                }
            }
        };
        offset.push(a);
        scale.push(d);
    }
    AffineMap::new(offset, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn graded_order_two_by_two() {
        let set = enumerate_indices(2, 2).unwrap();
        let got: Vec<Vec<usize>> = set.iter().map(|a| a.0.clone()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn degree_zero_and_univariate() {
        let set = enumerate_indices(3, 0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.indices()[0].0, vec![0, 0, 0]);

        let set = enumerate_indices(1, 3).unwrap();
        let got: Vec<usize> = set.iter().map(|a| a.0[0]).collect();
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn cardinality_matches_binomial() {
        for n in 1..=6 {
            for p in 0..=10 {
                let set = enumerate_indices(n, p).unwrap();
                assert_eq!(set.len(), binomial(n + p, p), "n={n} p={p}");
                let mut sorted = set.indices().to_vec();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), set.len());
                assert!(set.iter().all(|a| a.degree() <= p && a.len() == n));
            }
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(enumerate_indices(0, 3).is_err());
    }

    #[test]
    fn one_dimensional_values() {
        assert_relative_eq!(
            eval_poly_1d(BasisFamily::Legendre, 2, 0.5),
            -0.125,
            epsilon = 1e-15
        );
        for fam in BasisFamily::ALL {
            assert_eq!(eval_poly_1d(fam, 0, 7.3), 1.0);
            assert_eq!(eval_poly_1d_deriv(fam, 0, 7.3), 0.0);
        }
        assert_relative_eq!(eval_poly_1d(BasisFamily::Monomial, 3, 2.0), 8.0);
        assert_relative_eq!(eval_poly_1d(BasisFamily::Hermite, 3, 2.0), 8.0 - 6.0);
        assert_relative_eq!(
            eval_poly_1d_deriv(BasisFamily::Legendre, 2, 0.5),
            1.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            eval_poly_1d_deriv(BasisFamily::Monomial, 4, 1.1),
            5.324,
            epsilon = 1e-12
        );
    }

    #[test]
    fn legendre_endpoint_normalization() {
        for k in 0..15 {
            assert_relative_eq!(
                eval_poly_1d(BasisFamily::Legendre, k, 1.0),
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        for fam in BasisFamily::ALL {
            for k in 0..=10 {
                for i in 0..=40 {
                    let y = -2.0 + 0.1 * i as f64;
                    let fd =
                        (eval_poly_1d(fam, k, y + h) - eval_poly_1d(fam, k, y - h)) / (2.0 * h);
                    let exact = eval_poly_1d_deriv(fam, k, y);
                    // relative error against the scale of the polynomial near y
                    let scale = exact.abs().max(eval_poly_1d(fam, k, y).abs()).max(1.0);
                    assert!(
                        (fd - exact).abs() <= 1e-6 * scale,
                        "{fam} k={k} y={y}: fd={fd} exact={exact}"
                    );
                }
            }
        }
    }

    // Gauss-Legendre nodes by Newton iteration on P_q, independent of the
    // recurrence-derivative code path above.
    fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
        let mut nodes = Vec::with_capacity(q);
        let mut weights = Vec::with_capacity(q);
        for i in 0..q {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 1..q {
                    let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, x);
            for k in 1..q {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        (nodes, weights)
    }

    #[test]
    fn legendre_orthogonality_by_quadrature() {
        let (nodes, weights) = gauss_legendre(12);
        for j in 0..=8 {
            for k in 0..=8 {
                let integral: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| {
                        w * eval_poly_1d(BasisFamily::Legendre, j, *x)
                            * eval_poly_1d(BasisFamily::Legendre, k, *x)
                    })
                    .sum();
                if j == k {
                    assert_relative_eq!(integral, 2.0 / (2 * j + 1) as f64, epsilon = 1e-12);
                } else {
                    assert!(integral.abs() <= 1e-12, "j={j} k={k} integral={integral}");
                }
            }
        }
    }

    #[test]
    fn affine_endpoint_mapping() {
        let pts = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let map = fit_affine_map(BasisFamily::Legendre, &pts).unwrap();
        assert_relative_eq!(map.apply_coord(0, 0.0), -1.0);
        assert_relative_eq!(map.apply_coord(0, 2.0), 1.0);
        assert_relative_eq!(map.apply_coord(0, 1.0), 0.0);
    }

    #[test]
    fn affine_degenerate_column() {
        let pts = DMatrix::from_element(4, 1, 5.0);
        let map = fit_affine_map(BasisFamily::Legendre, &pts).unwrap();
        assert_eq!(map.scale(), &[1.0]);
        assert_eq!(map.offset(), &[-5.0]);
        assert_eq!(map.apply_coord(0, 5.0), 0.0);
        let map = fit_affine_map(BasisFamily::Hermite, &pts).unwrap();
        assert_eq!(map.scale(), &[1.0]);
        assert_eq!(map.apply_coord(0, 5.0), 0.0);
    }

    #[test]
    fn affine_hermite_standardized_is_identity() {
        let pts = DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]);
        let map = fit_affine_map(BasisFamily::Hermite, &pts).unwrap();
        assert_relative_eq!(map.scale()[0], 1.0);
        assert_relative_eq!(map.offset()[0], 0.0);
    }

    #[test]
    fn affine_rejects_bad_scale() {
        assert!(AffineMap::new(vec![0.0], vec![0.0]).is_err());
        assert!(AffineMap::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for fam in BasisFamily::ALL {
            assert_eq!(fam.name().parse::<BasisFamily>().unwrap(), fam);
        }
        assert!("chebyshev".parse::<BasisFamily>().is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn affine_lands_in_unit_box(
                vals in proptest::collection::vec(-1e3f64..1e3, 1..60),
                cols in 1usize..4,
            ) {
                let rows = vals.len() / cols;
                prop_assume!(rows >= 1);
                let pts = DMatrix::from_column_slice(rows, cols, &vals[..rows * cols]);
                for fam in [BasisFamily::Legendre, BasisFamily::Monomial] {
                    let map = fit_affine_map(fam, &pts).unwrap();
                    for i in 0..rows {
                        for k in 0..cols {
                            let z = map.apply_coord(k, pts[(i, k)]);
                            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z), "z = {}", z);
                        }
                    }
                }
            }
        }
    }
}
