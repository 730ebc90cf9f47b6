//! Synthetic test functions, active-subspace estimators and the experiment
//! drivers behind `polyridge bench`.
//!
//! Every driver derives all randomness from one master seed. Data draws and
//! solver initializations use disjoint ChaCha streams, so replicate `r` of a
//! study starts from the same subspace regardless of how many replicates run
//! or in which order.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::basis::{enumerate_indices, fit_affine_map, AffineMap, BasisFamily};
use crate::error::{Result, RidgeError};
use crate::grassmann::{subspace_angle, Subspace};
use crate::solver::{
    alternating_from, gauss_newton_from, initial_subspace, FitReport, SolverConfig,
};
use crate::vandermonde::{build_design, matrix_condition_number};
use crate::varpro::ProjectedProblem;

/// Streams at or above this offset are reserved for data draws.
const DATA_STREAM: u64 = 1 << 40;

/// Generator for data stream `stream` of the master seed.
pub fn data_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATA_STREAM + stream);
    rng
}

/// Axis-aligned hypercube `[lower, upper]^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lower: f64,
    pub upper: f64,
}

impl Domain {
    pub const SYMMETRIC: Domain = Domain {
        lower: -1.0,
        upper: 1.0,
    };
    pub const UNIT: Domain = Domain {
        lower: 0.0,
        upper: 1.0,
    };

    /// `rows` points drawn uniformly from the cube in `R^m`.
    pub fn sample<R: Rng + ?Sized>(&self, rows: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(rows, m);
        for i in 0..rows {
            for j in 0..m {
                x[(i, j)] = rng.random_range(self.lower..self.upper);
            }
        }
        x
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A scalar function on a hypercube, with its ridge subspace when known.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub m: usize,
    pub params: Vec<(String, f64)>,
    pub domain: Domain,
    pub true_subspace: Option<Subspace>,
    evaluator: Evaluator,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("params", &self.params)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

fn span(m: usize, columns: &[Vec<f64>]) -> Subspace {
    let a = DMatrix::from_fn(m, columns.len(), |i, j| columns[j][i]);
    Subspace::from_span(a).expect("independent columns")
}

fn unit(m: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[j] = 1.0;
    v
}

impl TestFunction {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.m);
        (self.evaluator)(x)
    }

    /// Values at each row of `points`.
    pub fn evaluate_rows(&self, points: &DMatrix<f64>) -> DVector<f64> {
        let mut buf = vec![0.0; points.ncols()];
        DVector::from_fn(points.nrows(), |i, _| {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = points[(i, j)];
            }
            self.evaluate(&buf)
        })
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rows: usize,
        rng: &mut R,
    ) -> (DMatrix<f64>, DVector<f64>) {
        let x = self.domain.sample(rows, self.m, rng);
        let f = self.evaluate_rows(&x);
        (x, f)
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// `(e_1^T x)^2 + (1^T x / 10)^3 + 1` on `[-1, 1]^10`.
    pub fn cubic_ridge() -> Self {
        let m = 10;
        TestFunction {
            name: "cubic_ridge".into(),
            m,
            params: vec![],
            domain: Domain::SYMMETRIC,
            true_subspace: Some(span(m, &[unit(m, 0), vec![1.0; m]])),
            evaluator: Arc::new(|x| {
                let s: f64 = x.iter().sum::<f64>() / 10.0;
                x[0] * x[0] + s * s * s + 1.0
            }),
        }
    }

    /// `(1^T x)^p + sum_{j<n} (e_j^T x)^(p-1)` on `[-1, 1]^10`.
    pub fn timing_family(n: usize, p: usize) -> Result<Self> {
        let m = 10;
        if n == 0 || n > m || p < 2 {
            return Err(RidgeError::InvalidArgument(format!(
                "timing family needs 1 <= n <= {m} and p >= 2, got n = {n}, p = {p}"
            )));
        }
        let mut cols = vec![vec![1.0; m]];
        cols.extend((0..n - 1).map(|j| unit(m, j)));
        Ok(TestFunction {
            name: format!("timing_n{n}_p{p}"),
            m,
            params: vec![("n".into(), n as f64), ("p".into(), p as f64)],
            domain: Domain::SYMMETRIC,
            true_subspace: Some(span(m, &cols)),
            evaluator: Arc::new(move |x| {
                let s: f64 = x.iter().sum();
                s.powi(p as i32) + x[..n - 1].iter().map(|v| v.powi(p as i32 - 1)).sum::<f64>()
            }),
        })
    }

    /// `sum_{j<=n} (e_j^T x)^2` on `[-1, 1]^10`.
    pub fn quadratic_sum(n: usize) -> Result<Self> {
        let m = 10;
        if n == 0 || n > m {
            return Err(RidgeError::InvalidArgument(format!(
                "quadratic sum needs 1 <= n <= {m}, got {n}"
            )));
        }
        let cols: Vec<Vec<f64>> = (0..n).map(|j| unit(m, j)).collect();
        Ok(TestFunction {
            name: format!("quadratic_sum_n{n}"),
            m,
            params: vec![("n".into(), n as f64)],
            domain: Domain::SYMMETRIC,
            true_subspace: Some(span(m, &cols)),
            evaluator: Arc::new(move |x| x[..n].iter().map(|v| v * v).sum()),
        })
    }

    /// `0.5 (1^T x)^2 + alpha sum_j cos(beta pi x_j)` on `[-1, 1]^m`.
    ///
    /// The stored subspace is the dominant active direction `1/sqrt(m)`; the
    /// function is an exact ridge only when `alpha = 0`.
    pub fn oscillatory(m: usize, alpha: f64, beta: f64) -> Result<Self> {
        if m == 0 {
            return Err(RidgeError::InvalidArgument("m must be positive".into()));
        }
        let w = beta * std::f64::consts::PI;
        Ok(TestFunction {
            name: "oscillatory".into(),
            m,
            params: vec![("alpha".into(), alpha), ("beta".into(), beta)],
            domain: Domain::SYMMETRIC,
            true_subspace: Some(span(m, &[vec![1.0; m]])),
            evaluator: Arc::new(move |x| {
                let s: f64 = x.iter().sum();
                0.5 * s * s + alpha * x.iter().map(|v| (w * v).cos()).sum::<f64>()
            }),
        })
    }

    /// `|u^T x| + 0.1 (sin(1000 x_2) + 1)` on `[-1, 1]^100` with `u` uniform
    /// on the unit sphere, drawn from `seed`.
    pub fn toy(seed: u64) -> Self {
        let m = 100;
        let mut rng = data_rng(seed, 0);
        let mut u: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= norm);
        let direction = u.clone();
        TestFunction {
            name: "toy".into(),
            m,
            params: vec![],
            domain: Domain::SYMMETRIC,
            true_subspace: Some(span(m, &[u])),
            evaluator: Arc::new(move |x| {
                let y: f64 = direction.iter().zip(x).map(|(a, b)| a * b).sum();
                y.abs() + 0.1 * ((1000.0 * x[1]).sin() + 1.0)
            }),
        }
    }
}

/// One instance of each built-in function, with the parameters used by the
/// experiments.
pub fn builtin_functions() -> Vec<TestFunction> {
    vec![
        TestFunction::cubic_ridge(),
        TestFunction::timing_family(2, 3).expect("valid parameters"),
        TestFunction::quadratic_sum(2).expect("valid parameters"),
        TestFunction::oscillatory(100, 0.02, 1.0).expect("valid parameters"),
        TestFunction::toy(0),
    ]
}

/// `C = 1 1^T + (alpha beta pi)^2 I` for the oscillatory function, with its
/// leading eigenvector.
pub fn active_subspace_closed_form(m: usize, alpha: f64, beta: f64) -> (DMatrix<f64>, Subspace) {
    let s = (alpha * beta * std::f64::consts::PI).powi(2);
    let c = DMatrix::from_fn(m, m, |i, j| 1.0 + if i == j { s } else { 0.0 });
    let lead = leading_eigenvector(&c);
    (c, lead)
}

fn leading_eigenvector(c: &DMatrix<f64>) -> Subspace {
    let eig = SymmetricEigen::new(c.clone());
    let k = eig.eigenvalues.imax();
    let mut v = eig.eigenvectors.column(k).into_owned();
    if v.sum() < 0.0 {
        v.neg_mut();
    }
    Subspace::from_span(DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
        .expect("unit eigenvector")
}

/// Leading eigenvector of the averaged outer product of one-sided
/// finite-difference gradients at `samples` uniform points; costs
/// `samples * (m + 1)` evaluations.
pub fn active_subspace_monte_carlo(
    function: &TestFunction,
    samples: usize,
    h: f64,
    seed: u64,
) -> Result<Subspace> {
    if samples == 0 {
        return Err(RidgeError::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(RidgeError::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let m = function.m;
    let mut rng = data_rng(seed, 0);
    let x = function.domain.sample(samples, m, &mut rng);
    let mut c = DMatrix::zeros(m, m);
    let mut point = vec![0.0; m];
    let mut g = DVector::zeros(m);
    for i in 0..samples {
        for j in 0..m {
            point[j] = x[(i, j)];
        }
        let f0 = function.evaluate(&point);
        for j in 0..m {
            let keep = point[j];
            point[j] = keep + h;
            g[j] = (function.evaluate(&point) - f0) / h;
            point[j] = keep;
        }
        c.ger(1.0 / samples as f64, &g, &g, 1.0);
    }
    Ok(leading_eigenvector(&c))
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:e}"),
            Cell::Text(v) => f.write_str(v),
            Cell::Bool(v) => write!(f, "{v}"),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

/// Tabular experiment output. The last column is always `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub name: String,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ExperimentResult {
    fn new(name: &str, seed: u64, columns: &[&str]) -> Self {
        let mut columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        columns.push("seed".into());
        ExperimentResult {
            name: name.into(),
            seed,
            columns,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, mut row: Vec<Cell>) {
        row.push(Cell::from(self.seed));
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Knobs shared by the experiment drivers; `None` picks each study's default.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicates: Option<usize>,
    pub samples: Option<usize>,
    pub max_iter: Option<usize>,
    pub inner_steps: Option<usize>,
}

impl ExperimentConfig {
    pub fn with_seed(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            replicates: None,
            samples: None,
            max_iter: None,
            inner_steps: None,
        }
    }
}

pub const EXPERIMENTS: [&str; 5] = [
    "convergence",
    "timing",
    "global_min",
    "conditioning",
    "subspace_recovery",
];

/// Runs a named study.
pub fn run_experiment(name: &str, config: &ExperimentConfig) -> Result<ExperimentResult> {
    match name {
        "convergence" => Ok(convergence_table(
            &convergence_study(&ConvergenceSettings::from(config))?,
            config.seed,
        )),
        "timing" => Ok(timing_table(
            &timing_study(&TimingSettings::from(config))?,
            config.seed,
        )),
        "global_min" => Ok(global_min_table(
            &global_min_study(&GlobalMinSettings::from(config))?,
            config.seed,
        )),
        "conditioning" => Ok(conditioning_table(
            &conditioning_study(&ConditioningSettings::from(config))?,
            config.seed,
        )),
        "subspace_recovery" => Ok(recovery_table(
            &recovery_study(&RecoverySettings::from(config))?,
            config.seed,
        )),
        other => Err(RidgeError::UnknownExperiment {
            name: other.into(),
            valid: EXPERIMENTS.join(", "),
        }),
    }
}

fn parallel<T: Send, F>(count: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

// ---------------------------------------------------------------- convergence

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    pub seed: u64,
    pub replicates: usize,
    pub samples: usize,
    pub max_iter: usize,
    pub inner_steps: usize,
    /// Standard deviation of additive Gaussian noise; zero for exact data.
    pub noise: f64,
}

impl From<&ExperimentConfig> for ConvergenceSettings {
    fn from(c: &ExperimentConfig) -> Self {
        ConvergenceSettings {
            seed: c.seed,
            replicates: c.replicates.unwrap_or(10),
            samples: c.samples.unwrap_or(1000),
            max_iter: c.max_iter.unwrap_or(40),
            inner_steps: c.inner_steps.unwrap_or(crate::solver::DEFAULT_INNER_STEPS),
            noise: 0.0,
        }
    }
}

/// Matched Gauss-Newton and alternating runs from one initial subspace.
#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub replicate: usize,
    pub noise_norm: f64,
    pub gauss_newton: FitReport,
    pub alternating: FitReport,
}

/// Data and noise for the cubic-ridge convergence study.
pub fn convergence_problem(
    seed: u64,
    samples: usize,
    noise: f64,
) -> Result<(ProjectedProblem, f64)> {
    let func = TestFunction::cubic_ridge();
    let mut rng = data_rng(seed, 0);
    let (x, mut f) = func.sample(samples, &mut rng);
    let mut noise_norm = 0.0;
    if noise > 0.0 {
        let mut noise_rng = data_rng(seed, 1);
        let e = DVector::from_fn(samples, |_, _| {
            noise * noise_rng.sample::<f64, _>(StandardNormal)
        });
        noise_norm = e.norm();
        f += e;
    }
    Ok((
        ProjectedProblem::new(x, f, 3, BasisFamily::Legendre)?,
        noise_norm,
    ))
}

pub fn convergence_study(s: &ConvergenceSettings) -> Result<Vec<ConvergenceRun>> {
    let (problem, noise_norm) = convergence_problem(s.seed, s.samples, s.noise)?;
    let config = SolverConfig {
        max_iter: s.max_iter,
        seed: s.seed,
        ..Default::default()
    };
    parallel(s.replicates, |r| {
        let u0 = initial_subspace(problem.ambient_dim(), 2, s.seed, r)?;
        let (_, gauss_newton) = gauss_newton_from(&problem, u0.clone(), &config)?;
        let (_, alternating) = alternating_from(&problem, u0, &config, s.inner_steps)?;
        Ok(ConvergenceRun {
            replicate: r,
            noise_norm,
            gauss_newton,
            alternating,
        })
    })
}

fn convergence_table(runs: &[ConvergenceRun], seed: u64) -> ExperimentResult {
    let mut out = ExperimentResult::new(
        "convergence",
        seed,
        &["solver", "replicate", "iter", "residual"],
    );
    for run in runs {
        for report in [&run.gauss_newton, &run.alternating] {
            for (k, res) in report.normalized_residuals().into_iter().enumerate() {
                out.push(vec![
                    report.solver.name().into(),
                    run.replicate.into(),
                    k.into(),
                    res.into(),
                ]);
            }
        }
    }
    out
}

// --------------------------------------------------------------------- timing

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSettings {
    pub seed: u64,
    pub replicates: usize,
    pub samples: usize,
    pub cases: Vec<(usize, usize)>,
    pub inner_steps: Vec<usize>,
    pub target: f64,
    pub max_iter: usize,
    /// Per-fit wall-clock cap.
    pub time_limit: Duration,
}

impl From<&ExperimentConfig> for TimingSettings {
    fn from(c: &ExperimentConfig) -> Self {
        TimingSettings {
            seed: c.seed,
            replicates: c.replicates.unwrap_or(10),
            samples: c.samples.unwrap_or(1000),
            cases: vec![(1, 3), (2, 3)],
            inner_steps: c
                .inner_steps
                .map(|k| vec![k])
                .unwrap_or_else(|| vec![1, 10, 100]),
            target: 1e-5,
            max_iter: c.max_iter.unwrap_or(500),
            time_limit: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub n: usize,
    pub p: usize,
    pub replicate: usize,
    pub solver: &'static str,
    pub inner_steps: usize,
    pub seconds: f64,
    pub iterations: usize,
    pub reached: bool,
}

fn reached(report: &FitReport, target: f64) -> bool {
    report
        .normalized_residuals()
        .last()
        .is_some_and(|r| *r <= target)
}

/// Wall-clock time for each solver to reach the target residual on the
/// timing family, from matched starts. Replicates run sequentially so timings
/// do not compete for cores.
pub fn timing_study(s: &TimingSettings) -> Result<Vec<TimingRecord>> {
    let mut out = Vec::new();
    let config = SolverConfig {
        max_iter: s.max_iter,
        target_residual: Some(s.target),
        time_limit: Some(s.time_limit),
        seed: s.seed,
        ..Default::default()
    };
    for (case, &(n, p)) in s.cases.iter().enumerate() {
        let func = TestFunction::timing_family(n, p)?;
        let (x, f) = func.sample(s.samples, &mut data_rng(s.seed, case as u64));
        let problem = ProjectedProblem::new(x, f, p, BasisFamily::Legendre)?;
        for r in 0..s.replicates {
            let u0 = initial_subspace(func.m, n, s.seed, r)?;
            let (_, rep) = gauss_newton_from(&problem, u0.clone(), &config)?;
            out.push(TimingRecord {
                n,
                p,
                replicate: r,
                solver: "gauss-newton",
                inner_steps: 0,
                seconds: rep.wall_time.as_secs_f64(),
                iterations: rep.num_steps(),
                reached: reached(&rep, s.target),
            });
            for &k in &s.inner_steps {
                let (_, rep) = alternating_from(&problem, u0.clone(), &config, k)?;
                out.push(TimingRecord {
                    n,
                    p,
                    replicate: r,
                    solver: "alternating",
                    inner_steps: k,
                    seconds: rep.wall_time.as_secs_f64(),
                    iterations: rep.num_steps(),
                    reached: reached(&rep, s.target),
                });
            }
        }
    }
    Ok(out)
}

fn timing_table(records: &[TimingRecord], seed: u64) -> ExperimentResult {
    let mut out = ExperimentResult::new(
        "timing",
        seed,
        &[
            "n",
            "p",
            "solver",
            "inner_steps",
            "replicate",
            "seconds",
            "iterations",
            "reached",
        ],
    );
    for r in records {
        out.push(vec![
            r.n.into(),
            r.p.into(),
            r.solver.into(),
            r.inner_steps.into(),
            r.replicate.into(),
            r.seconds.into(),
            r.iterations.into(),
            r.reached.into(),
        ]);
    }
    out
}

/// Median over replicates of the Gauss-Newton time and of the fastest
/// alternating variant per replicate, for case `(n, p)`. Runs that never
/// reached the target count as infinitely slow.
pub fn median_times(records: &[TimingRecord], n: usize, p: usize) -> (f64, f64) {
    let replicates: Vec<usize> = {
        let mut v: Vec<usize> = records
            .iter()
            .filter(|r| r.n == n && r.p == p)
            .map(|r| r.replicate)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut gn = Vec::new();
    let mut alt = Vec::new();
    for r in replicates {
        let rows = records
            .iter()
            .filter(|t| t.n == n && t.p == p && t.replicate == r);
        let mut best_alt = f64::INFINITY;
        for t in rows {
            let secs = if t.reached { t.seconds } else { f64::INFINITY };
            if t.solver == "gauss-newton" {
                gn.push(secs);
            } else {
                best_alt = best_alt.min(secs);
            }
        }
        alt.push(best_alt);
    }
    (median(&mut gn), median(&mut alt))
}

/// Median of a non-empty sample; NaN when empty.
pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

// ----------------------------------------------------------------- global_min

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMinSettings {
    pub seed: u64,
    pub replicates: usize,
    pub samples: usize,
    pub dims: Vec<usize>,
    /// Normalized residual above which a run counts as a failure.
    pub failure_threshold: f64,
}

impl From<&ExperimentConfig> for GlobalMinSettings {
    fn from(c: &ExperimentConfig) -> Self {
        GlobalMinSettings {
            seed: c.seed,
            replicates: c.replicates.unwrap_or(100),
            samples: c.samples.unwrap_or(1000),
            dims: vec![1, 2, 3],
            failure_threshold: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMinSummary {
    pub n: usize,
    pub replicates: usize,
    pub failures: usize,
}

impl GlobalMinSummary {
    pub fn failure_fraction(&self) -> f64 {
        self.failures as f64 / self.replicates as f64
    }
}

/// Quadratic fits of `quadratic_sum(n)` from independent random starts,
/// counting runs that stop away from the zero-residual minimizer.
pub fn global_min_study(s: &GlobalMinSettings) -> Result<Vec<GlobalMinSummary>> {
    let config = SolverConfig {
        seed: s.seed,
        ..Default::default()
    };
    let mut out = Vec::new();
    for &n in &s.dims {
        let func = TestFunction::quadratic_sum(n)?;
        let (x, f) = func.sample(s.samples, &mut data_rng(s.seed, n as u64));
        let problem = ProjectedProblem::new(x, f, 2, BasisFamily::Legendre)?;
        let failed = parallel(s.replicates, |r| {
            let u0 = initial_subspace(func.m, n, s.seed, r)?;
            let (_, rep) = gauss_newton_from(&problem, u0, &config)?;
            Ok(!reached(&rep, s.failure_threshold))
        })?;
        out.push(GlobalMinSummary {
            n,
            replicates: s.replicates,
            failures: failed.iter().filter(|b| **b).count(),
        });
    }
    Ok(out)
}

fn global_min_table(rows: &[GlobalMinSummary], seed: u64) -> ExperimentResult {
    let mut out = ExperimentResult::new(
        "global_min",
        seed,
        &["n", "replicates", "failures", "failure_fraction"],
    );
    for r in rows {
        out.push(vec![
            r.n.into(),
            r.replicates.into(),
            r.failures.into(),
            r.failure_fraction().into(),
        ]);
    }
    out
}

// --------------------------------------------------------------- conditioning

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSettings {
    pub seed: u64,
    pub samples: usize,
    pub m: usize,
    pub max_degree: usize,
}

impl From<&ExperimentConfig> for ConditioningSettings {
    fn from(c: &ExperimentConfig) -> Self {
        ConditioningSettings {
            seed: c.seed,
            samples: c.samples.unwrap_or(1000),
            m: 100,
            max_degree: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningRecord {
    pub family: BasisFamily,
    pub scaled: bool,
    pub degree: usize,
    pub cond: f64,
}

/// Condition numbers of one-dimensional design matrices along
/// `U = 1 / sqrt(m)` for samples uniform on `[0, 1]^m`, with and without the
/// affine normalization.
pub fn conditioning_study(s: &ConditioningSettings) -> Result<Vec<ConditioningRecord>> {
    let x = Domain::UNIT.sample(s.samples, s.m, &mut data_rng(s.seed, 0));
    let u = span(s.m, &[vec![1.0; s.m]]);
    let y = &x * u.matrix();
    let mut out = Vec::new();
    for family in [BasisFamily::Legendre, BasisFamily::Monomial] {
        for scaled in [true, false] {
            let affine = if scaled {
                fit_affine_map(family, &y)?
            } else {
                AffineMap::identity(1)
            };
            for degree in 1..=s.max_degree {
                let idx = enumerate_indices(1, degree)?;
                let design = build_design(&x, &u, &idx, family, &affine)?;
                out.push(ConditioningRecord {
                    family,
                    scaled,
                    degree,
                    cond: matrix_condition_number(&design.values)?,
                });
            }
        }
    }
    Ok(out)
}

fn conditioning_table(rows: &[ConditioningRecord], seed: u64) -> ExperimentResult {
    let mut out =
        ExperimentResult::new("conditioning", seed, &["basis", "scaled", "degree", "cond"]);
    for r in rows {
        out.push(vec![
            r.family.name().into(),
            r.scaled.into(),
            r.degree.into(),
            r.cond.into(),
        ]);
    }
    out
}

pub fn condition_of(
    rows: &[ConditioningRecord],
    family: BasisFamily,
    scaled: bool,
    degree: usize,
) -> Option<f64> {
    rows.iter()
        .find(|r| r.family == family && r.scaled == scaled && r.degree == degree)
        .map(|r| r.cond)
}

// ---------------------------------------------------------- subspace_recovery

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySettings {
    pub seed: u64,
    pub replicates: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub budgets: Vec<usize>,
    pub h: f64,
    /// Also fit quadratic ridge approximations with `M = budget` samples.
    pub include_ridge: bool,
}

impl From<&ExperimentConfig> for RecoverySettings {
    fn from(c: &ExperimentConfig) -> Self {
        RecoverySettings {
            seed: c.seed,
            replicates: c.replicates.unwrap_or(20),
            m: 100,
            alpha: 0.02,
            beta: 1.0,
            budgets: vec![101, 202, 404, 606, 808, 1010],
            h: 1e-6,
            include_ridge: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRecord {
    pub method: &'static str,
    pub budget: usize,
    pub replicate: usize,
    pub angle: f64,
}

/// Angle to the dominant direction of the oscillatory function, for the
/// finite-difference active subspace (`L = budget / (m + 1)` gradients) and
/// optionally for ridge fits with `M = budget` samples.
pub fn recovery_study(s: &RecoverySettings) -> Result<Vec<RecoveryRecord>> {
    let func = TestFunction::oscillatory(s.m, s.alpha, s.beta)?;
    let truth = func
        .true_subspace
        .clone()
        .expect("oscillatory has a known direction");
    let mut jobs = Vec::new();
    for (b, &budget) in s.budgets.iter().enumerate() {
        for r in 0..s.replicates {
            jobs.push((b, budget, r));
        }
    }
    let per_job = jobs
        .par_iter()
        .map(|&(b, budget, r)| {
            let stream = (b * s.replicates + r) as u64;
            let mut recs = Vec::new();
            let gradients = (budget / (s.m + 1)).max(1);
            let est = active_subspace_monte_carlo(
                &func,
                gradients,
                s.h,
                s.seed.wrapping_add(stream << 20),
            )?;
            recs.push(RecoveryRecord {
                method: "finite_difference",
                budget,
                replicate: r,
                angle: subspace_angle(&est, &truth)?,
            });
            if s.include_ridge {
                let (x, f) = func.sample(budget, &mut data_rng(s.seed, stream));
                let problem = ProjectedProblem::new(x, f, 2, BasisFamily::Legendre)?;
                let u0 = initial_subspace(s.m, 1, s.seed, stream as usize)?;
                let cfg = SolverConfig {
                    seed: s.seed,
                    ..Default::default()
                };
                let (model, _) = gauss_newton_from(&problem, u0, &cfg)?;
                recs.push(RecoveryRecord {
                    method: "ridge",
                    budget,
                    replicate: r,
                    angle: subspace_angle(model.subspace(), &truth)?,
                });
            }
            Ok(recs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

fn recovery_table(rows: &[RecoveryRecord], seed: u64) -> ExperimentResult {
    let mut out = ExperimentResult::new(
        "subspace_recovery",
        seed,
        &["method", "budget", "replicate", "angle"],
    );
    for r in rows {
        out.push(vec![
            r.method.into(),
            r.budget.into(),
            r.replicate.into(),
            r.angle.into(),
        ]);
    }
    out
}

/// Least-squares slope of `log(median angle)` against `log(budget)` for one
/// method.
pub fn recovery_slope(rows: &[RecoveryRecord], method: &str) -> f64 {
    let mut budgets: Vec<usize> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| r.budget)
        .collect();
    budgets.sort_unstable();
    budgets.dedup();
    let points: Vec<(f64, f64)> = budgets
        .iter()
        .map(|&b| {
            let mut a: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.budget == b)
                .map(|r| r.angle)
                .collect();
            ((b as f64).ln(), median(&mut a).ln())
        })
        .collect();
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Times a closure.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}
