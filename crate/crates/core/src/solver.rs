//! Outer optimizers over the Grassmann manifold.
//!
//! [`fit_gauss_newton`] is the variable-projection Gauss-Newton method: at
//! each iterate it solves for the coefficients, builds the Golub-Pereyra
//! Jacobian, takes the pseudoinverse step `vec(Delta) = -J^+ r`, falls back to
//! steepest descent when that step is not a descent direction, and backtracks
//! along the geodesic until the Armijo test `||r+|| <= ||r|| + alpha beta t`
//! passes.
//!
//! [`fit_alternating`] is the baseline that alternates a coefficient solve
//! with a fixed number of geodesic steepest-descent steps on `U` with the
//! polynomial held fixed. Both share the same line search.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::AffineMap;
use crate::error::{Result, RidgeError};
use crate::grassmann::{
    random_subspace, smallest_subspace_angle, Geodesic, Subspace, TangentDirection,
};
use crate::linalg::thin_svd;
use crate::vandermonde::{
    build_design_derivative, design_from_coordinates, normalized_coordinates,
};
use crate::varpro::{
    gradient, jacobian, solve_coefficients, JacobianTensor, ProjectedProblem, VarproState,
};

pub use crate::model::{evaluate_model, RidgeModel};

/// Relative singular-value cutoff for the Gauss-Newton pseudoinverse.
pub const GN_RELATIVE_CUTOFF: f64 = 1e-12;

/// Residual norms at or below this multiple of `||f||` count as exact.
const EXACT_RESIDUAL: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Backtracking reduction factor, in `(0, 1)`.
    pub gamma: f64,
    /// Armijo tolerance, in `(0, 1)`.
    pub beta: f64,
    pub max_iter: usize,
    /// Step-length reductions tried before the line search gives up.
    pub max_backtracks: usize,
    /// Stop when `| ||r_prev|| - ||r|| | <= tol * ||r_prev||`.
    pub tol_residual_change: f64,
    /// Stop when `||G||_F <= tol * (1 + ||f||)`.
    pub tol_grad: f64,
    /// Stop when the smallest principal angle moved by a step is below this
    /// (radians).
    pub tol_subspace: f64,
    /// Stop as soon as `||r|| / ||f||` reaches this value.
    pub target_residual: Option<f64>,
    /// Stop with `MaxIterations` once a single fit has run this long.
    pub time_limit: Option<Duration>,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 0.5,
            beta: 1e-6,
            max_iter: 200,
            max_backtracks: 40,
            tol_residual_change: 1e-12,
            tol_grad: 1e-10,
            tol_subspace: 1e-9,
            target_residual: None,
            time_limit: None,
            seed: 0,
            restarts: 1,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        SolverConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(RidgeError::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {v}"
                )))
            }
        };
        unit("gamma", self.gamma)?;
        unit("beta", self.beta)?;
        if self.max_iter == 0 || self.max_backtracks == 0 || self.restarts == 0 {
            return Err(RidgeError::InvalidArgument(
                "max_iter, max_backtracks and restarts must be positive".into(),
            ));
        }
        for (name, v) in [
            ("tol_residual_change", self.tol_residual_change),
            ("tol_grad", self.tol_grad),
            ("tol_subspace", self.tol_subspace),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(RidgeError::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    ConvergedResidual,
    ConvergedGradient,
    ConvergedSubspace,
    MaxIterations,
    LineSearchFailure,
}

impl FitStatus {
    pub fn name(&self) -> &'static str {
        match self {
            FitStatus::ConvergedResidual => "converged_residual",
            FitStatus::ConvergedGradient => "converged_gradient",
            FitStatus::ConvergedSubspace => "converged_subspace",
            FitStatus::MaxIterations => "max_iterations",
            FitStatus::LineSearchFailure => "line_search_failure",
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(
            self,
            FitStatus::ConvergedResidual
                | FitStatus::ConvergedGradient
                | FitStatus::ConvergedSubspace
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    GaussNewton,
    Alternating,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::GaussNewton => "gauss-newton",
            SolverKind::Alternating => "alternating",
        }
    }
}

/// State of one iterate `U_l`, plus the step that produced it (zero for the
/// starting point).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub residual_norm: f64,
    pub grad_norm: f64,
    pub step_length: f64,
    pub gradient_fallback: bool,
    pub angle_moved: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub solver: SolverKind,
    pub iterations: Vec<IterationRecord>,
    pub status: FitStatus,
    pub wall_time: Duration,
    /// Which restart produced this fit.
    pub restart: usize,
    pub seed: u64,
    /// `||f||`, for normalizing residuals.
    pub values_norm: f64,
}

impl FitReport {
    pub fn final_residual_norm(&self) -> f64 {
        self.iterations
            .last()
            .map(|r| r.residual_norm)
            .unwrap_or(f64::NAN)
    }

    pub fn normalized_residuals(&self) -> Vec<f64> {
        let scale = if self.values_norm > 0.0 {
            self.values_norm
        } else {
            1.0
        };
        self.iterations
            .iter()
            .map(|r| r.residual_norm / scale)
            .collect()
    }

    /// Index of the first iterate with `||r|| / ||f|| <= level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        self.normalized_residuals().iter().position(|r| *r <= level)
    }

    /// Number of steps taken.
    pub fn num_steps(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }
}

fn check_feasible(problem: &ProjectedProblem, n: usize) -> Result<()> {
    let m = problem.ambient_dim();
    if n == 0 || n > m {
        return Err(RidgeError::InvalidArgument(format!(
            "subspace dimension must satisfy 1 <= n <= m = {m}, got {n}"
        )));
    }
    if problem.degree() == 1 && n > 1 {
        return Err(RidgeError::DegreeOneNeedsDimOne { n });
    }
    Ok(())
}

/// Independent generator for restart `restart` derived from the master seed.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Starting subspace for restart `restart`; shared by both solvers so they
/// can be compared from identical initializations.
pub fn initial_subspace(m: usize, n: usize, seed: u64, restart: usize) -> Result<Subspace> {
    random_subspace(m, n, &mut restart_rng(seed, restart))
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Gauss-Newton direction `vec(Delta) = -J^+ r` from the thin SVD of the
/// flattened Jacobian.
///
/// At most `mn - n^2` singular triplets are kept, and any with
/// `sigma <= 1e-12 sigma_1` are dropped. Returns the zero direction when
/// nothing survives.
pub fn gauss_newton_step(
    problem: &ProjectedProblem,
    state: &VarproState,
    jac: &JacobianTensor,
) -> Result<TangentDirection> {
    let m = jac.ambient_dim();
    let n = jac.dim();
    debug_assert_eq!(problem.num_samples(), jac.num_samples());
    let cap = (m * n).saturating_sub(n * n);
    if cap == 0 || state.residual.iter().all(|v| *v == 0.0) {
        return Ok(TangentDirection::zeros(m, n));
    }
    let svd = thin_svd(jac.flat())?;
    let sv = &svd.sigma;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(TangentDirection::zeros(m, n));
    }
    let mut step = DVector::<f64>::zeros(m * n);
    for i in 0..sv.len().min(cap) {
        if sv[i] <= GN_RELATIVE_CUTOFF * smax {
            break;
        }
        let coef = svd.u.column(i).dot(&state.residual) / sv[i];
        step -= svd.v.column(i) * coef;
    }
    Ok(TangentDirection::trusted(DMatrix::from_column_slice(
        m,
        n,
        step.as_slice(),
    )))
}

struct Accepted<T> {
    point: Subspace,
    payload: T,
    norm: f64,
    t: f64,
    backtracks: usize,
}

// Armijo backtracking along the geodesic from `u` in direction `dir`.
fn backtrack<T, F>(
    u: &Subspace,
    dir: &TangentDirection,
    r_norm: f64,
    slope: f64,
    config: &SolverConfig,
    mut eval: F,
) -> Result<Option<Accepted<T>>>
where
    F: FnMut(&Subspace) -> Result<(f64, T)>,
{
    let geo = Geodesic::new(u, dir)?;
    let mut t = 1.0;
    for k in 0..=config.max_backtracks {
        let candidate = geo.at(t);
        let (norm, payload) = eval(&candidate)?;
        if norm <= r_norm + slope * config.beta * t {
            return Ok(Some(Accepted {
                point: candidate,
                payload,
                norm,
                t,
                backtracks: k,
            }));
        }
        t *= config.gamma;
    }
    Ok(None)
}

struct Termination {
    grad_tol: f64,
    values_norm: f64,
    start: Instant,
}

impl Termination {
    fn new(problem: &ProjectedProblem, config: &SolverConfig) -> Self {
        let values_norm = problem.values().norm();
        Termination {
            grad_tol: config.tol_grad * (1.0 + values_norm),
            values_norm,
            start: Instant::now(),
        }
    }

    fn check(
        &self,
        config: &SolverConfig,
        iter: usize,
        r_norm: f64,
        g_norm: f64,
        prev: Option<(f64, f64)>,
    ) -> Option<FitStatus> {
        if r_norm <= EXACT_RESIDUAL * self.values_norm {
            return Some(FitStatus::ConvergedResidual);
        }
        if let Some(target) = config.target_residual {
            if r_norm <= target * self.values_norm {
                return Some(FitStatus::ConvergedResidual);
            }
        }
        if g_norm <= self.grad_tol {
            return Some(FitStatus::ConvergedGradient);
        }
        if let Some((prev_norm, angle)) = prev {
            if (prev_norm - r_norm).abs() <= config.tol_residual_change * prev_norm {
                return Some(FitStatus::ConvergedResidual);
            }
            if angle <= config.tol_subspace {
                return Some(FitStatus::ConvergedSubspace);
            }
        }
        if iter >= config.max_iter || config.time_limit.is_some_and(|l| self.start.elapsed() >= l) {
            return Some(FitStatus::MaxIterations);
        }
        None
    }
}

fn model_from_state(problem: &ProjectedProblem, state: &VarproState) -> Result<RidgeModel> {
    RidgeModel::new(
        problem.degree(),
        problem.family(),
        state.u.clone(),
        state.design.affine.clone(),
        state.coefficients.clone(),
        state.residual_norm(),
    )
}

/// Gauss-Newton from a given starting subspace.
pub fn gauss_newton_from(
    problem: &ProjectedProblem,
    u0: Subspace,
    config: &SolverConfig,
) -> Result<(RidgeModel, FitReport)> {
    config.validate()?;
    check_feasible(problem, u0.dim())?;
    let stop = Termination::new(problem, config);

    let mut state = solve_coefficients(problem, &u0)?;
    let mut records = Vec::new();
    let mut last = IterationRecord {
        residual_norm: 0.0,
        grad_norm: 0.0,
        step_length: 0.0,
        gradient_fallback: false,
        angle_moved: 0.0,
        backtracks: 0,
    };
    let mut prev: Option<(f64, f64)> = None;
    let status = loop {
        let jac = jacobian(problem, &state)?;
        let g = gradient(&jac, &state.residual)?;
        let r_norm = state.residual_norm();
        let g_norm = g.norm();
        last.residual_norm = r_norm;
        last.grad_norm = g_norm;
        records.push(last.clone());

        if let Some(status) = stop.check(config, records.len() - 1, r_norm, g_norm, prev) {
            break status;
        }

        let mut dir = gauss_newton_step(problem, &state, &jac)?;
        let mut slope = frob_dot(&g, dir.matrix());
        let mut fallback = false;
        if slope >= 0.0 || dir.is_zero() {
            dir = TangentDirection::trusted(-&g);
            slope = -g.norm_squared();
            fallback = true;
        }

        let accepted = backtrack(&state.u, &dir, r_norm, slope, config, |cand| {
            let s = solve_coefficients(problem, cand)?;
            Ok((s.residual_norm(), s))
        })?;
        let Some(acc) = accepted else {
            break FitStatus::LineSearchFailure;
        };
        let angle = smallest_subspace_angle(&state.u, &acc.point)?;
        prev = Some((r_norm, angle));
        last = IterationRecord {
            residual_norm: acc.norm,
            grad_norm: 0.0,
            step_length: acc.t,
            gradient_fallback: fallback,
            angle_moved: angle,
            backtracks: acc.backtracks,
        };
        state = acc.payload;
    };

    let model = model_from_state(problem, &state)?;
    let report = FitReport {
        solver: SolverKind::GaussNewton,
        iterations: records,
        status,
        wall_time: stop.start.elapsed(),
        restart: 0,
        seed: config.seed,
        values_norm: stop.values_norm,
    };
    Ok((model, report))
}

fn best_of(results: Vec<(RidgeModel, FitReport)>) -> (RidgeModel, FitReport) {
    let mut best: Option<(RidgeModel, FitReport)> = None;
    for cand in results {
        let better = match &best {
            None => true,
            Some((_, rep)) => cand.1.final_residual_norm() < rep.final_residual_norm(),
        };
        if better {
            best = Some(cand);
        }
    }
    best.expect("at least one restart")
}

fn run_restarts<F>(
    problem: &ProjectedProblem,
    n: usize,
    config: &SolverConfig,
    fit: F,
) -> Result<(RidgeModel, FitReport)>
where
    F: Fn(Subspace) -> Result<(RidgeModel, FitReport)> + Sync,
{
    config.validate()?;
    check_feasible(problem, n)?;
    let m = problem.ambient_dim();
    let results: Vec<(RidgeModel, FitReport)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let u0 = initial_subspace(m, n, config.seed, r)?;
            let (model, mut report) = fit(u0)?;
            report.restart = r;
            Ok((model, report))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(best_of(results))
}

/// Fits an `n`-dimensional polynomial ridge approximation by
/// variable-projection Gauss-Newton, keeping the best of `config.restarts`
/// random starts (ties go to the lowest restart index).
pub fn fit_gauss_newton(
    problem: &ProjectedProblem,
    n: usize,
    config: &SolverConfig,
) -> Result<(RidgeModel, FitReport)> {
    run_restarts(problem, n, config, |u0| {
        gauss_newton_from(problem, u0, config)
    })
}

/// Default steepest-descent steps per alternating iteration.
pub const DEFAULT_INNER_STEPS: usize = 100;

// Residual f - V(U) c with the polynomial (affine map and coefficients) fixed.
struct FixedPolynomial<'a> {
    problem: &'a ProjectedProblem,
    state: &'a VarproState,
}

impl FixedPolynomial<'_> {
    fn affine(&self) -> &AffineMap {
        &self.state.design.affine
    }

    fn residual(&self, u: &Subspace) -> DVector<f64> {
        let z = normalized_coordinates(self.problem.points(), u, self.affine());
        let v = design_from_coordinates(&z, &self.state.design.index_set, self.problem.family());
        self.problem.values() - v * &self.state.coefficients
    }

    // Riemannian gradient of 0.5 ||f - V(U) c||^2:
    // P_perp (-X^T diag(r) [D_1 c, ..., D_n c]).
    fn gradient(&self, u: &Subspace, residual: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = build_design_derivative(
            self.problem.points(),
            u,
            &self.state.design.index_set,
            self.problem.family(),
            self.affine(),
        )?;
        let n = u.dim();
        let rows = self.problem.num_samples();
        let mut weights = DMatrix::zeros(rows, n);
        for l in 0..n {
            let dc = d.partial(l) * &self.state.coefficients;
            for i in 0..rows {
                weights[(i, l)] = -residual[i] * dc[i];
            }
        }
        let euclid = self.problem.points().tr_mul(&weights);
        Ok(u.complement_project(&euclid))
    }
}

/// Alternating baseline from a given starting subspace.
pub fn alternating_from(
    problem: &ProjectedProblem,
    u0: Subspace,
    config: &SolverConfig,
    inner_steps: usize,
) -> Result<(RidgeModel, FitReport)> {
    config.validate()?;
    check_feasible(problem, u0.dim())?;
    let stop = Termination::new(problem, config);

    let mut state = solve_coefficients(problem, &u0)?;
    let mut records = Vec::new();
    let mut last = IterationRecord {
        residual_norm: 0.0,
        grad_norm: 0.0,
        step_length: 0.0,
        gradient_fallback: false,
        angle_moved: 0.0,
        backtracks: 0,
    };
    let mut prev: Option<(f64, f64)> = None;
    let status = loop {
        let fixed = FixedPolynomial {
            problem,
            state: &state,
        };
        let r_norm = state.residual_norm();
        let g = fixed.gradient(&state.u, &state.residual)?;
        let g_norm = g.norm();
        last.residual_norm = r_norm;
        last.grad_norm = g_norm;
        records.push(last.clone());

        if let Some(status) = stop.check(config, records.len() - 1, r_norm, g_norm, prev) {
            break status;
        }

        let mut u = state.u.clone();
        let mut residual = state.residual.clone();
        let mut inner_norm = r_norm;
        let mut g = g;
        let mut step_t = 0.0;
        let mut backtracks = 0;
        for s in 0..inner_steps {
            if s > 0 {
                g = fixed.gradient(&u, &residual)?;
            }
            if g.norm() <= stop.grad_tol {
                break;
            }
            let dir = TangentDirection::trusted(-&g);
            let slope = -g.norm_squared();
            let accepted = backtrack(&u, &dir, inner_norm, slope, config, |cand| {
                let r = fixed.residual(cand);
                Ok((r.norm(), r))
            })?;
            let Some(acc) = accepted else { break };
            u = acc.point;
            residual = acc.payload;
            inner_norm = acc.norm;
            step_t = acc.t;
            backtracks += acc.backtracks;
        }

        let angle = smallest_subspace_angle(&state.u, &u)?;
        let next = solve_coefficients(problem, &u)?;
        prev = Some((r_norm, angle));
        last = IterationRecord {
            residual_norm: next.residual_norm(),
            grad_norm: 0.0,
            step_length: step_t,
            gradient_fallback: false,
            angle_moved: angle,
            backtracks,
        };
        state = next;
    };

    let model = model_from_state(problem, &state)?;
    let report = FitReport {
        solver: SolverKind::Alternating,
        iterations: records,
        status,
        wall_time: stop.start.elapsed(),
        restart: 0,
        seed: config.seed,
        values_norm: stop.values_norm,
    };
    Ok((model, report))
}

/// Alternating baseline: coefficient solve, then `inner_steps` geodesic
/// steepest-descent steps on `U` with the polynomial fixed, repeated.
pub fn fit_alternating(
    problem: &ProjectedProblem,
    n: usize,
    config: &SolverConfig,
    inner_steps: usize,
) -> Result<(RidgeModel, FitReport)> {
    if inner_steps == 0 {
        return Err(RidgeError::InvalidArgument(
            "inner_steps must be positive".into(),
        ));
    }
    run_restarts(problem, n, config, |u0| {
        alternating_from(problem, u0, config, inner_steps)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisFamily;
    use crate::grassmann::{orthonormality_error, random_subspace_seeded, subspace_angle};
    use rand::{Rng, SeedableRng};

    fn ridge_problem(
        rows: usize,
        m: usize,
        n: usize,
        p: usize,
        seed: u64,
    ) -> (ProjectedProblem, Subspace) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(rows, m, |_, _| rng.random_range(-1.0..1.0));
        let truth = random_subspace_seeded(m, n, seed + 1).unwrap();
        let y = &x * truth.matrix();
        let f = DVector::from_fn(rows, |i, _| {
            let row: Vec<f64> = (0..n).map(|k| y[(i, k)]).collect();
            1.0 + row.iter().sum::<f64>()
                + row[0].powi(p as i32)
                + if n > 1 { row[0] * row[1] } else { 0.0 }
        });
        (
            ProjectedProblem::new(x, f, p, BasisFamily::Legendre).unwrap(),
            truth,
        )
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig {
            gamma: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            beta: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            restarts: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn feasibility_rule() {
        let (p, _) = ridge_problem(30, 4, 1, 1, 1);
        assert!(matches!(
            fit_gauss_newton(&p, 2, &SolverConfig::default()),
            Err(RidgeError::DegreeOneNeedsDimOne { n: 2 })
        ));
        assert!(fit_gauss_newton(&p, 5, &SolverConfig::default()).is_err());
        assert!(fit_gauss_newton(&p, 0, &SolverConfig::default()).is_err());
        assert!(fit_gauss_newton(&p, 1, &SolverConfig::default()).is_ok());
    }

    #[test]
    fn zero_residual_step_is_zero() {
        let (p, truth) = ridge_problem(40, 4, 1, 2, 2);
        let s = solve_coefficients(&p, &truth).unwrap();
        let mut exact = s.clone();
        exact.residual.fill(0.0);
        let jac = jacobian(&p, &exact).unwrap();
        assert!(gauss_newton_step(&p, &exact, &jac).unwrap().is_zero());
    }

    #[test]
    fn step_is_tangent() {
        for seed in 0..10 {
            let (p, _) = ridge_problem(50, 5, 2, 3, 10 + seed);
            let u = random_subspace_seeded(5, 2, 100 + seed).unwrap();
            let s = solve_coefficients(&p, &u).unwrap();
            let jac = jacobian(&p, &s).unwrap();
            let d = gauss_newton_step(&p, &s, &jac).unwrap();
            assert!(u.matrix().tr_mul(d.matrix()).amax() <= 1e-8 * d.norm().max(1e-300));
        }
    }

    #[test]
    fn constant_data_converges_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
        let p = ProjectedProblem::new(x, DVector::from_element(30, 2.5), 3, BasisFamily::Legendre)
            .unwrap();
        for n in 1..=2 {
            let (model, report) = fit_gauss_newton(&p, n, &SolverConfig::default()).unwrap();
            assert!(report.status.is_converged());
            assert_eq!(report.iterations.len(), 1);
            assert!(model.training_residual_norm() <= 1e-12);
        }
    }

    #[test]
    fn degree_zero_is_accepted() {
        let (p, _) = ridge_problem(20, 3, 1, 0, 4);
        let (model, report) = fit_gauss_newton(&p, 2, &SolverConfig::default()).unwrap();
        assert!(report.status.is_converged());
        assert_eq!(model.coefficients().len(), 1);
        let mean = p.values().mean();
        assert!((model.coefficients()[0] - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
    }

    #[test]
    fn recovers_exact_ridge_and_descends_monotonically() {
        let (p, truth) = ridge_problem(200, 5, 2, 3, 5);
        let cfg = SolverConfig {
            restarts: 4,
            seed: 6,
            ..Default::default()
        };
        let (model, report) = fit_gauss_newton(&p, 2, &cfg).unwrap();
        assert!(report.status.is_converged(), "{:?}", report.status);
        assert!(model.training_residual_norm() <= 1e-10 * p.values().norm());
        assert!(subspace_angle(model.subspace(), &truth).unwrap() <= 1e-6);
        assert!(orthonormality_error(model.subspace().matrix()) <= 1e-10);
        for w in report.iterations.windows(2) {
            assert!(w[1].residual_norm < w[0].residual_norm);
        }
        let pred = model.evaluate(p.points()).unwrap();
        assert!((pred - p.values()).amax() <= 1e-8 * p.values().amax());
    }

    #[test]
    fn alternating_first_solve_matches_varpro() {
        let (p, _) = ridge_problem(60, 4, 1, 3, 7);
        let cfg = SolverConfig {
            max_iter: 1,
            seed: 8,
            ..Default::default()
        };
        let u0 = initial_subspace(4, 1, 8, 0).unwrap();
        let direct = solve_coefficients(&p, &u0).unwrap();
        let (_, report) = alternating_from(&p, u0, &cfg, 5).unwrap();
        assert_eq!(report.iterations[0].residual_norm, direct.residual_norm());
    }

    #[test]
    fn alternating_descends() {
        let (p, _) = ridge_problem(150, 4, 1, 3, 9);
        let cfg = SolverConfig {
            max_iter: 30,
            seed: 10,
            ..Default::default()
        };
        let (_, report) = fit_alternating(&p, 1, &cfg, 20).unwrap();
        for w in report.iterations.windows(2) {
            assert!(w[1].residual_norm <= w[0].residual_norm);
        }
    }

    #[test]
    fn fixed_polynomial_gradient_matches_differences() {
        let (p, _) = ridge_problem(25, 3, 1, 3, 11);
        let u = random_subspace_seeded(3, 1, 12).unwrap();
        let s = solve_coefficients(&p, &u).unwrap();
        let fixed = FixedPolynomial {
            problem: &p,
            state: &s,
        };
        let g = fixed.gradient(&u, &s.residual).unwrap();
        // The projected fixed-c gradient equals the variable-projection gradient.
        let gv = gradient(&jacobian(&p, &s).unwrap(), &s.residual).unwrap();
        assert!((&g - &gv).amax() <= 1e-9 * (1.0 + gv.amax()));
    }

    #[test]
    fn restarts_are_deterministic() {
        let (p, _) = ridge_problem(80, 4, 1, 3, 13);
        let cfg = SolverConfig {
            restarts: 3,
            seed: 14,
            ..Default::default()
        };
        let (m1, r1) = fit_gauss_newton(&p, 1, &cfg).unwrap();
        let (m2, r2) = fit_gauss_newton(&p, 1, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1.iterations, r2.iterations);
        assert_eq!(r1.restart, r2.restart);
    }
}
