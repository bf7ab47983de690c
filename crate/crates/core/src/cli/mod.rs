//! Command-line front end: corpus synthesis, fitting, constrained and
//! unconstrained sampling, density-line oracles and validation.

mod args;
mod model;

use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

pub use args::{
    default_cv_grid, AxisSpec, BandwidthSpec, Cli, Command, ConstraintArgs, CsampleArgs, FitArgs,
    GridArgs, OracleArgs, SampleArgs, SynthArgs, ValidateArgs, WindowArgs, WindowShape,
};
pub use model::{Model, ModelFile};

use crate::constraint::LinearConstraint;
use crate::error::{Error, Result};
use crate::io::{
    export_samples, parse_constraint, read_grid_density, read_samples, read_trajectories,
    write_atomic, write_grid_density, write_json, write_matrix_csv, write_trajectories,
};
use crate::oracle::{
    conditional_density_line, default_axis, histogram_distance, linspace, ConstraintLine,
    GridDensity, LineAxis,
};
use crate::reduction::EndpointKind;
use crate::rng::{stream, Stream};
use crate::sampler::{prepare, SamplerState};
use crate::scenario::{synthesize_trajectories, window_profiles, SynthParams, Trajectory};

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    ValidationFailed,
}

pub fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Synth(a) => synth(a, cli.seed),
        Command::Window(a) => window(a),
        Command::Fit(a) => fit(a),
        Command::Sample(a) => sample(a, cli.seed),
        Command::Csample(a) => csample(a, cli.seed),
        Command::Oracle(a) => oracle(a),
        Command::Validate(a) => validate(a),
    }
}

fn synth(a: &SynthArgs, seed: u64) -> Result<Status> {
    let params = SynthParams {
        speed_range: (a.speed_min, a.speed_max),
        accel_bounds: (a.accel_min, a.accel_max),
        segment_duration: (a.segment_min, a.segment_max),
    };
    let mut rng = stream(seed, Stream::Corpus);
    let trajs = synthesize_trajectories(&mut rng, a.vehicles, a.duration, a.dt, &params)?;
    write_trajectories(&a.out, &trajs)?;
    eprintln!("wrote {} trajectories to {}", trajs.len(), a.out.display());
    if let Some(path) = &a.profiles {
        write_profiles(&trajs, &a.window, a.window.profile_dt.unwrap_or(a.dt), path)?;
    }
    Ok(Status::Success)
}

fn window(a: &WindowArgs) -> Result<Status> {
    let trajs = read_trajectories(&a.input)?;
    write_profiles(
        &trajs,
        &a.window,
        a.window.profile_dt.unwrap_or(0.1),
        &a.out,
    )?;
    Ok(Status::Success)
}

fn write_profiles(trajs: &[Trajectory], shape: &WindowShape, dt: f64, path: &Path) -> Result<()> {
    let stride = shape.stride.unwrap_or(shape.n_t);
    let mut rows: Vec<f64> = Vec::new();
    let mut count = 0;
    let mut skipped = 0;
    for traj in trajs {
        match window_profiles(traj, dt, shape.n_t, stride) {
            Ok(profiles) => {
                for p in profiles {
                    rows.extend_from_slice(p.speeds());
                    count += 1;
                }
            }
            Err(Error::TooShort { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if count == 0 {
        return Err(Error::EmptyInput(
            "no trajectory is long enough for one profile".into(),
        ));
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} trajectories shorter than one profile");
    }
    let profiles = DMatrix::from_row_slice(count, shape.n_t + 1, &rows);
    export_samples(&profiles, path)?;
    eprintln!("wrote {count} profiles to {}", path.display());
    Ok(())
}

fn fit(a: &FitArgs) -> Result<Status> {
    let (model, file) = Model::fit(&a.data, !a.no_standardize, &a.bandwidth, a.d_red)?;
    write_json(&a.out, &file)?;
    eprintln!(
        "fit {} points in {} dimensions; log det H = {:.6}",
        model.kde.data().n(),
        model.kde.dim(),
        model.kde.bandwidth().log_det()
    );
    Ok(Status::Success)
}

fn sample(a: &SampleArgs, seed: u64) -> Result<Status> {
    let model = Model::load(&a.model)?;
    let mut rng = stream(seed, Stream::Sampling);
    let rows = model.kde.sample(&mut rng, a.m);
    export_samples(&model.output_rows(rows, a.reduced)?, &a.out)?;
    Ok(Status::Success)
}

/// The constraint in estimator coordinates.
fn resolve_constraint(args: &ConstraintArgs, model: &Model) -> Result<LinearConstraint> {
    let d = model.kde.dim();
    if let Some(text) = &args.constraint {
        let c = parse_constraint(text)?;
        return match &model.basis {
            _ if c.dim() == d => Ok(c),
            Some(b) if c.dim() == b.full_dim() => b.reduce_constraint(&c),
            _ => Err(Error::DimensionMismatch {
                expected: d,
                got: c.dim(),
            }),
        };
    }
    let v_init = args
        .init_speed
        .ok_or_else(|| Error::InvalidArgument("give --constraint or --init-speed".into()))?;
    let basis = model.basis.as_ref().ok_or_else(|| {
        Error::InvalidArgument("endpoint shorthands need a model fit with --d-red".into())
    })?;
    let (kind, second) = match (args.init_accel, args.end_speed) {
        (Some(acc), None) => (EndpointKind::InitSpeedAccel, acc),
        (None, Some(end)) => (EndpointKind::InitEndSpeed, end),
        _ => {
            return Err(Error::InvalidArgument(
                "--init-speed needs exactly one of --init-accel or --end-speed".into(),
            ))
        }
    };
    basis.endpoint_constraint(kind, (v_init, second), args.dt)
}

fn report_diagnostics(state: &SamplerState) {
    let diag = state.diagnostics();
    if diag.underflow {
        eprintln!(
            "warning: constraint is far from the data (max log-weight {:.1}); samples follow the nearest kernels",
            diag.max_log_weight
        );
    }
    if diag.low_ess {
        eprintln!(
            "warning: effective sample size {:.2}; samples concentrate on few kernels",
            diag.ess
        );
    }
}

fn max_relative_residual(c: &LinearConstraint, rows: &DMatrix<f64>) -> f64 {
    let scale = 1.0 + c.b().norm();
    rows.row_iter()
        .map(|r| c.residual(&r.transpose()) / scale)
        .fold(0.0, f64::max)
}

fn csample(a: &CsampleArgs, seed: u64) -> Result<Status> {
    let model = Model::load(&a.model)?;
    let c = resolve_constraint(&a.constraint, &model)?;
    let state = prepare(&model.kde, &c)?;
    report_diagnostics(&state);
    let mut rng = stream(seed, Stream::Sampling);
    let rows = state.draw_many(&mut rng, a.m);
    let worst = max_relative_residual(&c, &rows);
    if worst > 1e-8 {
        eprintln!("constraint residual {worst:e} exceeds 1e-8; nothing written");
        return Ok(Status::ValidationFailed);
    }
    if let Some(path) = &a.histogram {
        let axis = match a.axis {
            Some(AxisSpec(axis)) => axis,
            None => default_axis(&model.kde, &c).unwrap_or(LineAxis::Raw(0)),
        };
        let values = axis_values(&model, &c, axis, &rows)?;
        write_histogram(path, &values, a.bins)?;
    }
    export_samples(&model.output_rows(rows, a.reduced)?, &a.out)?;
    Ok(Status::Success)
}

fn axis_values(
    model: &Model,
    c: &LinearConstraint,
    axis: LineAxis,
    rows: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    match axis {
        LineAxis::Raw(k) if k < rows.ncols() => Ok(rows.column(k).iter().cloned().collect()),
        LineAxis::Raw(k) => Err(Error::InvalidArgument(format!(
            "axis p{} out of range",
            k + 1
        ))),
        LineAxis::Free => Ok(ConstraintLine::new(&model.kde, c, LineAxis::Free)?.abscissae(rows)),
    }
}

fn write_histogram(path: &Path, values: &[f64], bins: usize) -> Result<()> {
    if values.is_empty() || bins == 0 {
        return Err(Error::EmptyInput("histogram needs samples and bins".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let m = values.len() as f64;
    let table = DMatrix::from_fn(bins, 4, |b, j| match j {
        0 => lo + width * b as f64,
        1 => lo + width * (b + 1) as f64,
        2 => counts[b] as f64,
        _ => counts[b] as f64 / (m * width),
    });
    let header = ["lo", "hi", "count", "density"].map(String::from);
    write_matrix_csv(path, &header, &table)
}

fn oracle_grid(
    model: &Model,
    c: &LinearConstraint,
    grid: &GridArgs,
) -> Result<(LineAxis, GridDensity)> {
    let axis = match grid.axis {
        Some(AxisSpec(axis)) => axis,
        None => default_axis(&model.kde, c)?,
    };
    let line = ConstraintLine::new(&model.kde, c, axis)?;
    let (lo, hi) = match (grid.lo, grid.hi) {
        (Some(lo), Some(hi)) => (lo, hi),
        (lo, hi) => {
            let state = prepare(&model.kde, c)?;
            let span = line.covering_span(&state, 8.0)?;
            (lo.unwrap_or(span.0), hi.unwrap_or(span.1))
        }
    };
    if !(lo < hi) || grid.points < 2 {
        return Err(Error::InvalidArgument(format!(
            "empty grid [{lo}, {hi}] with {} points",
            grid.points
        )));
    }
    let density = conditional_density_line(&model.kde, c, &linspace(lo, hi, grid.points), axis)?;
    Ok((axis, density))
}

fn oracle(a: &OracleArgs) -> Result<Status> {
    let model = Model::load(&a.model)?;
    let c = resolve_constraint(&a.constraint, &model)?;
    let (_, density) = oracle_grid(&model, &c, &a.grid)?;
    write_grid_density(&a.out, &density)?;
    Ok(Status::Success)
}

/// Machine-readable result of `validate`.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub max_residual: f64,
    pub residual_tol: f64,
    pub residual_ok: bool,
    /// `None` when the constraint leaves more than one free dimension.
    pub tv: Option<f64>,
    pub tv_max: f64,
    pub tv_ok: bool,
    pub pass: bool,
}

fn validate(a: &ValidateArgs) -> Result<Status> {
    let model = Model::load(&a.model)?;
    let c = resolve_constraint(&a.constraint, &model)?;
    let rows = model.estimator_rows(read_samples(&a.samples)?)?;
    if rows.nrows() == 0 {
        return Err(Error::EmptyInput(format!(
            "{} has no samples",
            a.samples.display()
        )));
    }
    let max_residual = max_relative_residual(&c, &rows);
    let free_dim = crate::constraint::decompose(&c)?.free_dim();
    let tv = if free_dim == 1 {
        let (axis, density) = match &a.oracle {
            Some(path) => {
                let axis = match a.grid.axis {
                    Some(AxisSpec(axis)) => axis,
                    None => default_axis(&model.kde, &c)?,
                };
                (axis, read_grid_density(path)?)
            }
            None => oracle_grid(&model, &c, &a.grid)?,
        };
        let line = ConstraintLine::new(&model.kde, &c, axis)?;
        Some(histogram_distance(
            &line.abscissae(&rows),
            &density,
            a.bins,
        )?)
    } else {
        None
    };
    let residual_ok = max_residual <= a.residual_tol;
    let tv_ok = tv.is_none_or(|t| t <= a.tv_max);
    let report = ValidationReport {
        samples: rows.nrows(),
        max_residual,
        residual_tol: a.residual_tol,
        residual_ok,
        tv,
        tv_max: a.tv_max,
        tv_ok,
        pass: residual_ok && tv_ok,
    };
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(path) = &a.report {
        write_atomic(path, |w| Ok(writeln!(w, "{text}")?))?;
    }
    Ok(if report.pass {
        Status::Success
    } else {
        Status::ValidationFailed
    })
}
