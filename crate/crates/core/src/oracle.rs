//! Brute-force references for checking the constrained sampler: the KDE
//! evaluated and normalized along a one-dimensional constraint line, and
//! epsilon-slab rejection sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::constraint::{decompose, ConstraintDecomposition, LinearConstraint};
use crate::error::{Error, Result};
use crate::kde::GaussianKde;
use crate::sampler::SamplerState;

/// Coordinate used to parametrize a one-dimensional constraint line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineAxis {
    /// A raw data coordinate (zero-based column index).
    Raw(usize),
    /// The free rotated coordinate in the estimator's working space.
    Free,
}

/// Affine parametrization of the solution set of a constraint leaving
/// exactly one free dimension.
#[derive(Debug, Clone)]
pub struct ConstraintLine {
    dec: ConstraintDecomposition,
    mean: DVector<f64>,
    std: DVector<f64>,
    axis: LineAxis,
    fixed_point: DVector<f64>,
    direction: DVector<f64>,
}

impl ConstraintLine {
    pub fn new(kde: &GaussianKde, c: &LinearConstraint, axis: LineAxis) -> Result<Self> {
        if c.dim() != kde.dim() {
            return Err(Error::DimensionMismatch {
                expected: kde.dim(),
                got: c.dim(),
            });
        }
        let data = kde.data();
        let dec = decompose(&c.to_working(data.mean(), data.std())?)?;
        if dec.free_dim() != 1 {
            return Err(Error::UnsupportedDimension(dec.free_dim()));
        }
        if let LineAxis::Raw(k) = axis {
            if k >= kde.dim() {
                return Err(Error::InvalidArgument(format!("axis {k} out of range")));
            }
            if dec.v2()[(k, 0)].abs() < 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {k} is fixed by the constraint and cannot parametrize the line"
                )));
            }
        }
        Ok(Self {
            fixed_point: dec.v1() * dec.x_bar(),
            direction: dec.v2().column(0).into_owned(),
            dec,
            mean: data.mean().clone(),
            std: data.std().clone(),
            axis,
        })
    }

    pub fn decomposition(&self) -> &ConstraintDecomposition {
        &self.dec
    }

    /// Free coordinate `s` of the working-space point at abscissa `t`.
    fn free_coordinate(&self, t: f64) -> f64 {
        match self.axis {
            LineAxis::Free => t,
            LineAxis::Raw(k) => {
                let base = self.mean[k] + self.std[k] * self.fixed_point[k];
                (t - base) / (self.std[k] * self.direction[k])
            }
        }
    }

    /// Raw-space point on the line at abscissa `t`.
    pub fn point(&self, t: f64) -> DVector<f64> {
        let s = self.free_coordinate(t);
        let z = &self.fixed_point + &self.direction * s;
        z.component_mul(&self.std) + &self.mean
    }

    /// Abscissa of a raw-space point.
    pub fn abscissa(&self, x: &DVector<f64>) -> f64 {
        match self.axis {
            LineAxis::Raw(k) => x[k],
            LineAxis::Free => {
                let z = (x - &self.mean).component_div(&self.std);
                self.direction.dot(&z)
            }
        }
    }

    /// Abscissa interval covering every kernel whose constrained weight is
    /// above `exp(-50)`, padded by `sds` conditional standard deviations.
    pub fn covering_span(&self, state: &SamplerState, sds: f64) -> Result<(f64, f64)> {
        if state.dim() != self.mean.len() || state.decomposition().free_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: state.dim(),
            });
        }
        let slope = match self.axis {
            LineAxis::Free => 1.0,
            LineAxis::Raw(k) => (self.std[k] * self.direction[k]).abs(),
        };
        let pad = sds * state.precision().free_covariance()[(0, 0)].sqrt() * slope;
        let dec = state.decomposition();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, lw) in state.log_weights().iter().enumerate() {
            if *lw < -50.0 {
                continue;
            }
            let free = state.translated_means().row(i).transpose();
            let z = dec.reconstruct(dec.x_bar(), &free)?;
            let t = self.abscissa(&(z.component_mul(&self.std) + &self.mean));
            lo = lo.min(t);
            hi = hi.max(t);
        }
        Ok((lo - pad, hi + pad))
    }

    /// Abscissae of every row of a raw sample matrix.
    pub fn abscissae(&self, samples: &DMatrix<f64>) -> Vec<f64> {
        samples
            .row_iter()
            .map(|row| self.abscissa(&row.transpose()))
            .collect()
    }
}

/// Piecewise-linear density tabulated on a grid and normalized to unit
/// trapezoid integral.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
    normalization: f64,
}

impl GridDensity {
    /// Normalizes log-density values given on a strictly increasing grid.
    pub fn from_log_values(grid: Vec<f64>, log_values: &[f64]) -> Result<Self> {
        validate_grid(&grid)?;
        if log_values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: log_values.len(),
            });
        }
        let max = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NumericalBreakdown(
                "density vanishes on the whole grid".into(),
            ));
        }
        let mut values: Vec<f64> = log_values.iter().map(|l| (l - max).exp()).collect();
        let area = trapezoid(&grid, &values);
        values.iter_mut().for_each(|v| *v /= area);
        Ok(Self {
            grid,
            values,
            normalization: area * max.exp(),
        })
    }

    /// Normalizes non-negative density values given on a strictly increasing grid.
    pub fn from_values(grid: Vec<f64>, values: &[f64]) -> Result<Self> {
        validate_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "density values must be finite and non-negative".into(),
            ));
        }
        let area = trapezoid(&grid, values);
        if !(area > 0.0) {
            return Err(Error::NumericalBreakdown(
                "density vanishes on the whole grid".into(),
            ));
        }
        Ok(Self {
            grid,
            values: values.iter().map(|v| v / area).collect(),
            normalization: area,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid integral of the density before normalization.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Integral of the interpolated density from the grid start to `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.span();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let k = self.grid.partition_point(|g| *g <= x) - 1;
        let mut acc = 0.0;
        for i in 0..k {
            acc += 0.5 * (self.values[i] + self.values[i + 1]) * (self.grid[i + 1] - self.grid[i]);
        }
        let (f0, f1) = (self.values[k], self.values[k + 1]);
        let w = self.grid[k + 1] - self.grid[k];
        let s = x - self.grid[k];
        acc + f0 * s + (f1 - f0) * s * s / (2.0 * w)
    }

    /// Draws from the piecewise-linear density by exact inversion.
    pub fn sample_inverse_cdf<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Vec<f64> {
        let masses: Vec<f64> = self
            .grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(g, v)| 0.5 * (v[0] + v[1]) * (g[1] - g[0]))
            .collect();
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        (0..m)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let k = cumulative.partition_point(|c| *c < u).min(masses.len() - 1);
                let before = if k == 0 { 0.0 } else { cumulative[k - 1] };
                let r = (u - before).max(0.0);
                let (f0, f1) = (self.values[k], self.values[k + 1]);
                let w = self.grid[k + 1] - self.grid[k];
                let slope = (f1 - f0) / w;
                let s = if slope.abs() * w < 1e-12 * f0.max(f1) || slope == 0.0 {
                    if f0 > 0.0 {
                        r / f0
                    } else {
                        0.0
                    }
                } else {
                    (-f0 + (f0 * f0 + 2.0 * slope * r).max(0.0).sqrt()) / slope
                };
                self.grid[k] + s.clamp(0.0, w)
            })
            .collect()
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "grid needs at least two points".into(),
        ));
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (v[0] + v[1]) * (g[1] - g[0]))
        .sum()
}

/// `M` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (m - 1) as f64;
    (0..m)
        .map(|i| if i == m - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// First raw coordinate able to parametrize the constraint line, or the
/// free coordinate when every raw coordinate is fixed.
pub fn default_axis(kde: &GaussianKde, c: &LinearConstraint) -> Result<LineAxis> {
    for k in 0..kde.dim() {
        match ConstraintLine::new(kde, c, LineAxis::Raw(k)) {
            Ok(_) => return Ok(LineAxis::Raw(k)),
            Err(Error::InvalidArgument(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(LineAxis::Free)
}

/// The KDE evaluated along the constraint line and normalized on `grid`.
pub fn conditional_density_line(
    kde: &GaussianKde,
    c: &LinearConstraint,
    grid: &[f64],
    axis: LineAxis,
) -> Result<GridDensity> {
    let line = ConstraintLine::new(kde, c, axis)?;
    validate_grid(grid)?;
    let logs = grid
        .iter()
        .map(|&t| kde.log_density(&line.point(t)))
        .collect::<Result<Vec<f64>>>()?;
    GridDensity::from_log_values(grid.to_vec(), &logs)
}

/// Accepted, projected rejection samples and how many candidates were drawn.
#[derive(Debug, Clone)]
pub struct RejectionSamples {
    pub samples: DMatrix<f64>,
    pub tries: usize,
}

impl RejectionSamples {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.nrows() as f64 / self.tries as f64
    }
}

/// Unconstrained KDE draws kept when `||A x - b||_inf < epsilon` (raw units),
/// then projected orthogonally (in working space) onto the constraint set.
pub fn rejection_sample<R: Rng + ?Sized>(
    kde: &GaussianKde,
    c: &LinearConstraint,
    epsilon: f64,
    rng: &mut R,
    m: usize,
    max_tries: usize,
) -> Result<RejectionSamples> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if c.dim() != kde.dim() {
        return Err(Error::DimensionMismatch {
            expected: kde.dim(),
            got: c.dim(),
        });
    }
    let data = kde.data();
    // A_raw x_raw - b equals A_w z - b_w exactly, so test in working space
    let working = c.to_working(data.mean(), data.std())?;
    let dec = decompose(&working)?;
    let d = kde.dim();
    let mut out = DMatrix::zeros(m, d);
    let mut accepted = 0;
    let mut tries = 0;
    const BATCH: usize = 4096;
    while accepted < m && tries < max_tries {
        let batch = kde.sample_working(rng, BATCH.min(max_tries - tries));
        for row in batch.row_iter() {
            if accepted == m {
                break;
            }
            tries += 1;
            let z = row.transpose();
            if working.residual_inf(&z) < epsilon {
                let correction = dec.v1() * (dec.v1().tr_mul(&z) - dec.x_bar());
                let x = data.to_raw(&(z - correction));
                out.row_mut(accepted).copy_from(&x.transpose());
                accepted += 1;
            }
        }
    }
    if accepted < m {
        return Err(Error::AcceptanceTooLow {
            accepted,
            requested: m,
            tries,
        });
    }
    Ok(RejectionSamples {
        samples: out,
        tries,
    })
}

/// Total-variation distance between the histogram of `samples` over the
/// oracle's span and the oracle's bin masses. Samples outside the span count
/// as unmatched mass.
pub fn histogram_distance(samples: &[f64], oracle: &GridDensity, bins: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("histogram samples".into()));
    }
    if bins < 5 {
        return Err(Error::InvalidArgument(format!(
            "need at least 5 bins, got {bins}"
        )));
    }
    let (lo, hi) = oracle.span();
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &x in samples {
        if !(lo..=hi).contains(&x) {
            outside += 1;
            continue;
        }
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let m = samples.len() as f64;
    let mut tv = 0.5 * outside as f64 / m;
    let mut prev = 0.0;
    for (b, count) in counts.iter().enumerate() {
        let edge = if b == bins - 1 {
            hi
        } else {
            lo + width * (b + 1) as f64
        };
        let cdf = oracle.cdf(edge);
        tv += 0.5 * (*count as f64 / m - (cdf - prev)).abs();
        prev = cdf;
    }
    Ok(tv)
}
