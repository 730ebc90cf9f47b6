use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use polyridge::solver::{fit_alternating, fit_gauss_newton, FitReport, FitStatus, SolverConfig};
use polyridge::testbed::{run_experiment, ExperimentConfig};
use polyridge::varpro::ProjectedProblem;
use polyridge::RidgeModel;

use crate::args::{BenchArgs, FitArgs, PredictArgs, ShadowArgs, Solver, Tolerances};
use crate::data::{read_table_from, Dataset, Table};
use crate::document::{ModelDocument, TrainingMetadata};
use crate::error::CliError;

/// Exit code for a fit whose line search gave up.
pub const EXIT_SOLVER_FAILURE: i32 = 2;

fn open_output(path: &Path) -> Result<Box<dyn Write>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn io_err<E: std::error::Error + 'static>(e: E) -> CliError {
    let mut source: Option<&(dyn std::error::Error + 'static)> = Some(&e);
    while let Some(err) = source {
        let io = err.downcast_ref::<io::Error>().or_else(|| {
            match err.downcast_ref::<csv::Error>()?.kind() {
                csv::ErrorKind::Io(io) => Some(io),
                _ => None,
            }
        });
        if io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe) {
            return CliError::BrokenPipe;
        }
        source = err.source();
    }
    CliError::Io(e.to_string())
}

fn csv_writer(out: Box<dyn Write>) -> csv::Writer<Box<dyn Write>> {
    csv::WriterBuilder::new().from_writer(out)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn solver_config(t: &Tolerances, seed: u64, restarts: usize) -> SolverConfig {
    SolverConfig {
        gamma: t.gamma,
        beta: t.beta,
        max_iter: t.max_iter,
        max_backtracks: t.max_backtracks,
        tol_residual_change: t.tol_residual_change,
        tol_grad: t.tol_grad,
        tol_subspace: t.tol_subspace,
        seed,
        restarts,
        ..Default::default()
    }
}

pub fn fit(args: &FitArgs) -> Result<i32, CliError> {
    let table = read_table_from(&args.input)?;
    if table.is_empty() {
        return Err(CliError::Data("input is empty".into()));
    }
    let data = Dataset::from_table(&table, &args.target)?;
    let n = usize::try_from(args.dim).map_err(|_| CliError::Usage("--dim is too large".into()))?;
    let problem = ProjectedProblem::new(
        data.points.clone(),
        data.values.clone(),
        args.degree,
        args.basis.into(),
    )?;
    let seed = args.seed.unwrap_or_else(rand::random);
    let config = solver_config(&args.tolerances, seed, args.restarts);
    let (model, report) = match args.solver {
        Solver::GaussNewton => fit_gauss_newton(&problem, n, &config)?,
        Solver::Alternating => fit_alternating(&problem, n, &config, args.inner_steps)?,
    };

    let values_norm = data.values.norm();
    let residual = model.training_residual_norm();
    let training = TrainingMetadata {
        samples: data.values.len(),
        residual_norm: residual,
        normalized_residual: if values_norm > 0.0 {
            residual / values_norm
        } else {
            0.0
        },
        seed: seed.to_string(),
        solver: report.solver.name().into(),
        status: report.status.name().into(),
        iterations: report.num_steps(),
        features: data.features.clone(),
        target: data.target.clone(),
    };
    let doc = ModelDocument::from_model(&model, training);
    let mut out = open_output(&args.output)?;
    out.write_all(doc.to_json().as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    if let Some(path) = &args.trace {
        write_trace(path, &report)?;
    }
    eprint!("{}", summary(&doc, &report, config.restarts));
    Ok(if report.status == FitStatus::LineSearchFailure {
        EXIT_SOLVER_FAILURE
    } else {
        0
    })
}

fn summary(doc: &ModelDocument, report: &FitReport, restarts: usize) -> String {
    let t = &doc.training;
    format!(
        "solver      {}\n\
         status      {}\n\
         model       m = {}, n = {}, p = {}, basis {}\n\
         samples     {}\n\
         iterations  {}\n\
         residual    {:.6e} (normalized {:.6e})\n\
         restart     {} of {}\n\
         seed        {}\n\
         wall time   {:.3} s\n",
        t.solver,
        t.status,
        doc.m,
        doc.n,
        doc.p,
        doc.family,
        t.samples,
        t.iterations,
        t.residual_norm,
        t.normalized_residual,
        report.restart,
        restarts,
        t.seed,
        report.wall_time.as_secs_f64()
    )
}

fn write_trace(path: &Path, report: &FitReport) -> Result<(), CliError> {
    let mut w = csv_writer(open_output(path)?);
    w.write_record([
        "iter",
        "residual",
        "normalized_residual",
        "grad_norm",
        "step",
        "fallback",
        "angle",
        "backtracks",
    ])
    .map_err(io_err)?;
    let normalized = report.normalized_residuals();
    for (k, rec) in report.iterations.iter().enumerate() {
        w.write_record([
            k.to_string(),
            fmt(rec.residual_norm),
            fmt(normalized[k]),
            fmt(rec.grad_norm),
            fmt(rec.step_length),
            rec.gradient_fallback.to_string(),
            fmt(rec.angle_moved),
            rec.backtracks.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn load_model(path: &Path) -> Result<(ModelDocument, RidgeModel), CliError> {
    let doc = ModelDocument::read(path)?;
    let model = doc.to_model()?;
    Ok((doc, model))
}

fn feature_points(table: &Table, doc: &ModelDocument) -> Result<DMatrix<f64>, CliError> {
    let mut idx = Vec::with_capacity(doc.m);
    for name in &doc.training.features {
        let j = table.column(name).ok_or_else(|| {
            CliError::Data(format!(
                "input has no column '{name}'; the model needs {} inputs: {}",
                doc.m,
                doc.training.features.join(", ")
            ))
        })?;
        idx.push(j);
    }
    table.numeric(&idx)
}

pub fn predict(args: &PredictArgs) -> Result<i32, CliError> {
    let (doc, model) = load_model(&args.model)?;
    let table = read_table_from(&args.input)?;
    let out = open_output(&args.output)?;
    if table.is_empty() {
        let mut out = out;
        out.flush().map_err(io_err)?;
        return Ok(0);
    }
    let x = feature_points(&table, &doc)?;
    let g = model.evaluate(&x)?;
    let mut w = csv_writer(out);
    let mut header = table.header.clone();
    header.push("g".into());
    w.write_record(&header).map_err(io_err)?;
    for (row, gi) in table.rows.iter().zip(g.iter()) {
        let mut rec = row.clone();
        rec.push(fmt(*gi));
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(0)
}

/// `count` evenly spaced values covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|k| {
            if k + 1 == count {
                hi
            } else {
                lo + step * k as f64
            }
        })
        .collect()
}

pub fn shadow(args: &ShadowArgs) -> Result<i32, CliError> {
    let (doc, model) = load_model(&args.model)?;
    let table = read_table_from(&args.input)?;
    let target = args
        .target
        .clone()
        .unwrap_or_else(|| doc.training.target.clone());
    let mut out = open_output(&args.output)?;
    if table.is_empty() {
        out.flush().map_err(io_err)?;
        return Ok(0);
    }
    let t = table.column(&target).ok_or_else(|| {
        CliError::Data(format!(
            "observed-value column '{target}' not found in header"
        ))
    })?;
    let x = feature_points(&table, &doc)?;
    let f = table.numeric(&[t])?;
    let y = model.project(&x)?;
    let g = model.evaluate(&x)?;
    let n = doc.n;

    let mut order: Vec<usize> = (0..y.nrows()).collect();
    order.sort_by(|&a, &b| y[(a, 0)].total_cmp(&y[(b, 0)]));

    let mut w = csv_writer(out);
    let mut header: Vec<String> = (1..=n).map(|k| format!("y{k}")).collect();
    header.push("f".into());
    header.push("g".into());
    w.write_record(&header).map_err(io_err)?;
    for &i in &order {
        let mut rec: Vec<String> = (0..n).map(|k| fmt(y[(i, k)])).collect();
        rec.push(fmt(f[(i, 0)]));
        rec.push(fmt(g[i]));
        w.write_record(&rec).map_err(io_err)?;
    }
    let mut out = w.into_inner().map_err(io_err)?;

    if n == 1 && y.nrows() > 0 {
        let lo = y.column(0).min();
        let hi = y.column(0).max();
        let grid = linspace(lo, hi, args.curve_points as usize);
        let gy = model.evaluate_projected(&DMatrix::from_column_slice(grid.len(), 1, &grid))?;
        let sink: Box<dyn Write> = match &args.curve {
            Some(path) => {
                out.flush().map_err(io_err)?;
                open_output(path)?
            }
            None => {
                out.write_all(b"\n").map_err(io_err)?;
                out
            }
        };
        let mut w = csv_writer(sink);
        w.write_record(["y", "g"]).map_err(io_err)?;
        for (yk, gk) in grid.iter().zip(gy.iter()) {
            w.write_record([fmt(*yk), fmt(*gk)]).map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    } else {
        out.flush().map_err(io_err)?;
    }
    Ok(0)
}

pub fn bench(args: &BenchArgs) -> Result<i32, CliError> {
    let seed = args.seed.unwrap_or_else(rand::random);
    let config = ExperimentConfig {
        seed,
        replicates: args.replicates,
        samples: args.samples,
        max_iter: args.max_iter,
        inner_steps: args.inner_steps,
    };
    let result = run_experiment(&args.experiment, &config)?;
    let mut w = csv_writer(open_output(&args.output)?);
    w.write_record(&result.columns).map_err(io_err)?;
    for row in &result.rows {
        w.write_record(row.iter().map(|c| c.to_string()))
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    eprintln!("{}: {} rows, seed {seed}", result.name, result.rows.len());
    Ok(0)
}
