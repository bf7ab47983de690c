//! Python bindings: kernel density estimates, the constrained sampler, the
//! reduced SVD basis and the validation helpers.

use ckde::kde::{silverman_bandwidth, silverman_factor as rule_of_thumb, SilvermanDims};
use ckde::oracle::{self, GridDensity, LineAxis};
use ckde::reduction::{self, EndpointKind};
use ckde::rng::{stream, Stream, DEFAULT_SEED};
use ckde::scenario::{synthesize_trajectories, window_profiles, SynthParams};
use ckde::{prepare, BandwidthMatrix, DataSet, Error, GaussianKde, LinearConstraint, SamplerState};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

trait PyResultExt<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> PyResultExt<T> for ckde::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(|e| match e {
            Error::Io(io) => PyIOError::new_err(io.to_string()),
            other => PyValueError::new_err(other.to_string()),
        })
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    DataSet::from_rows(rows).py_err()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn constraint(a: &[Vec<f64>], b: &[f64]) -> PyResult<LinearConstraint> {
    LinearConstraint::from_rows(a, b).py_err()
}

fn axis(index: Option<usize>) -> LineAxis {
    index.map_or(LineAxis::Free, LineAxis::Raw)
}

/// Gaussian kernel density estimate.
///
/// `bandwidth` is "silverman" (default), a scalar h (H = h^2 I) or a full
/// matrix H, all in the working (standardized when `standardize`) coordinates.
#[pyclass(name = "KDE", module = "ckde_py")]
pub struct Kde {
    inner: GaussianKde,
}

#[pymethods]
impl Kde {
    #[new]
    #[pyo3(signature = (points, bandwidth=None, standardize=true))]
    fn new(
        points: Vec<Vec<f64>>,
        bandwidth: Option<&Bound<'_, PyAny>>,
        standardize: bool,
    ) -> PyResult<Self> {
        let points = matrix(&points)?;
        let data = if standardize {
            DataSet::standardized(points)
        } else {
            DataSet::new(points)
        }
        .py_err()?;
        let d = data.dim();
        let h = match bandwidth {
            None => silverman_bandwidth(&data, SilvermanDims::All).py_err()?,
            Some(bw) => {
                if let Ok(name) = bw.extract::<String>() {
                    if name != "silverman" {
                        return Err(PyValueError::new_err(format!(
                            "unknown bandwidth rule {name:?}"
                        )));
                    }
                    silverman_bandwidth(&data, SilvermanDims::All).py_err()?
                } else if let Ok(h) = bw.extract::<f64>() {
                    BandwidthMatrix::isotropic(h, d).py_err()?
                } else if let Ok(m) = bw.extract::<Vec<Vec<f64>>>() {
                    BandwidthMatrix::new(matrix(&m)?).py_err()?
                } else {
                    return Err(PyValueError::new_err(
                        "bandwidth must be 'silverman', a float or a matrix",
                    ));
                }
            }
        };
        Ok(Self {
            inner: GaussianKde::new(data, h).py_err()?,
        })
    }

    /// Leave-one-out cross-validated isotropic bandwidth over `candidates`.
    #[staticmethod]
    #[pyo3(signature = (points, candidates, standardize=true))]
    fn cross_validated(
        points: Vec<Vec<f64>>,
        candidates: Vec<f64>,
        standardize: bool,
    ) -> PyResult<Self> {
        let points = matrix(&points)?;
        let data = if standardize {
            DataSet::standardized(points)
        } else {
            DataSet::new(points)
        }
        .py_err()?;
        let h = ckde::kde::loo_cv_bandwidth(&data, &candidates).py_err()?;
        Ok(Self {
            inner: GaussianKde::new(data, h).py_err()?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.data().n()
    }

    #[getter]
    fn bandwidth(&self) -> Vec<Vec<f64>> {
        rows(self.inner.bandwidth().matrix())
    }

    fn log_density(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.log_density(&DVector::from_vec(x)).py_err()
    }

    fn density(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.density(&DVector::from_vec(x)).py_err()
    }

    /// `m` unconstrained draws in raw units.
    #[pyo3(signature = (m, seed=None))]
    fn sample(&self, py: Python<'_>, m: usize, seed: Option<u64>) -> Vec<Vec<f64>> {
        let mut rng = stream(seed.unwrap_or(DEFAULT_SEED), Stream::Sampling);
        let out = py.detach(|| self.inner.sample(&mut rng, m));
        rows(&out)
    }

    fn __repr__(&self) -> String {
        format!("KDE(n={}, dim={})", self.inner.data().n(), self.inner.dim())
    }
}

/// Exact sampler for a KDE restricted to `A x = b`.
#[pyclass(name = "ConstrainedSampler", module = "ckde_py")]
pub struct ConstrainedSampler {
    inner: SamplerState,
}

#[pymethods]
impl ConstrainedSampler {
    #[new]
    fn new(kde: PyRef<'_, Kde>, a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<Self> {
        let c = constraint(&a, &b)?;
        Ok(Self {
            inner: prepare(&kde.inner, &c).py_err()?,
        })
    }

    /// `m` draws in raw units; each satisfies the constraint to rounding.
    #[pyo3(signature = (m, seed=None))]
    fn draw(&self, py: Python<'_>, m: usize, seed: Option<u64>) -> Vec<Vec<f64>> {
        let mut rng = stream(seed.unwrap_or(DEFAULT_SEED), Stream::Sampling);
        let out = py.detach(|| self.inner.draw_many(&mut rng, m));
        rows(&out)
    }

    fn normalized_weights(&self) -> Vec<f64> {
        self.inner.normalized_weights().iter().cloned().collect()
    }

    /// Log-weights shifted so the largest is zero.
    fn log_weights(&self) -> Vec<f64> {
        self.inner.log_weights().iter().cloned().collect()
    }

    fn translated_means(&self) -> Vec<Vec<f64>> {
        rows(self.inner.translated_means())
    }

    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.diagnostics();
        let out = PyDict::new(py);
        out.set_item("ess", d.ess)?;
        out.set_item("max_log_weight", d.max_log_weight)?;
        out.set_item("active_weights", d.active_weights)?;
        out.set_item("low_ess", d.low_ess)?;
        out.set_item("underflow", d.underflow)?;
        Ok(out)
    }

    /// Largest `||A x - b||` over the rows of `samples`.
    fn max_residual(&self, samples: Vec<Vec<f64>>) -> PyResult<f64> {
        let c = self.inner.constraint();
        let m = matrix(&samples)?;
        if m.nrows() > 0 && m.ncols() != c.dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} columns, got {}",
                c.dim(),
                m.ncols()
            )));
        }
        Ok(m.row_iter()
            .map(|r| c.residual(&r.transpose()))
            .fold(0.0, f64::max))
    }
}

/// Truncated SVD basis mapping full parameter vectors to reduced coordinates.
#[pyclass(name = "ReducedBasis", module = "ckde_py")]
pub struct ReducedBasis {
    inner: reduction::ReducedBasis,
}

#[pymethods]
impl ReducedBasis {
    /// Returns the basis and the reduced coordinates of every row.
    #[staticmethod]
    fn fit(data: Vec<Vec<f64>>, d_red: usize) -> PyResult<(Self, Vec<Vec<f64>>)> {
        let (inner, coords) = reduction::fit(&matrix(&data)?, d_red).py_err()?;
        Ok((Self { inner }, rows(&coords)))
    }

    #[getter]
    fn full_dim(&self) -> usize {
        self.inner.full_dim()
    }

    #[getter]
    fn reduced_dim(&self) -> usize {
        self.inner.reduced_dim()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu().iter().cloned().collect()
    }

    #[getter]
    fn singular_values(&self) -> Vec<f64> {
        self.inner.sb1().iter().cloned().collect()
    }

    fn encode(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .encode(&DVector::from_vec(x))
            .py_err()?
            .iter()
            .cloned()
            .collect())
    }

    fn decode(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .decode(&DVector::from_vec(v))
            .py_err()?
            .iter()
            .cloned()
            .collect())
    }

    fn decode_rows(&self, v: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.decode_rows(&matrix(&v)?).py_err()?))
    }

    /// `(A, b)` in reduced coordinates fixing `(v_init, a_init)` for
    /// kind "accel" or `(v_init, v_end)` for kind "end".
    #[pyo3(signature = (kind, first, second, dt=0.1))]
    fn endpoint_constraint(
        &self,
        kind: &str,
        first: f64,
        second: f64,
        dt: f64,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
        let kind = match kind {
            "accel" => EndpointKind::InitSpeedAccel,
            "end" => EndpointKind::InitEndSpeed,
            _ => return Err(PyValueError::new_err("kind must be 'accel' or 'end'")),
        };
        let c = self
            .inner
            .endpoint_constraint(kind, (first, second), dt)
            .py_err()?;
        Ok((rows(c.a()), c.b().iter().cloned().collect()))
    }
}

/// `1.06 min(sigma, iqr / 1.34) n^(-1/5)`.
#[pyfunction]
fn silverman_factor(sigma: f64, iqr: f64, n: usize) -> f64 {
    rule_of_thumb(sigma, iqr, n)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = ckde::stats::ks_two_sample(&a, &b).py_err()?;
    Ok((r.statistic, r.p_value))
}

/// The KDE along a one-free-dimension constraint line, normalized on `grid`.
/// `axis` is a raw coordinate index, or None for the free coordinate.
#[pyfunction]
#[pyo3(signature = (kde, a, b, grid, axis=None))]
fn density_line(
    kde: PyRef<'_, Kde>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    grid: Vec<f64>,
    axis: Option<usize>,
) -> PyResult<Vec<f64>> {
    let c = constraint(&a, &b)?;
    let g = oracle::conditional_density_line(&kde.inner, &c, &grid, self::axis(axis)).py_err()?;
    Ok(g.values().to_vec())
}

/// Coordinates of raw samples along the constraint line.
#[pyfunction]
#[pyo3(signature = (kde, a, b, samples, axis=None))]
fn line_abscissae(
    kde: PyRef<'_, Kde>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    samples: Vec<Vec<f64>>,
    axis: Option<usize>,
) -> PyResult<Vec<f64>> {
    let c = constraint(&a, &b)?;
    let line = oracle::ConstraintLine::new(&kde.inner, &c, self::axis(axis)).py_err()?;
    Ok(line.abscissae(&matrix(&samples)?))
}

/// Total-variation distance between a histogram of `samples` and a tabulated density.
#[pyfunction]
#[pyo3(signature = (samples, grid, values, bins=40))]
fn histogram_distance(
    samples: Vec<f64>,
    grid: Vec<f64>,
    values: Vec<f64>,
    bins: usize,
) -> PyResult<f64> {
    let density = GridDensity::from_values(grid, &values).py_err()?;
    oracle::histogram_distance(&samples, &density, bins).py_err()
}

/// Epsilon-slab rejection samples projected onto the constraint.
#[pyfunction]
#[pyo3(signature = (kde, a, b, epsilon, m, seed=None, max_tries=10_000_000))]
#[allow(clippy::too_many_arguments)]
fn rejection_sample(
    py: Python<'_>,
    kde: PyRef<'_, Kde>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    epsilon: f64,
    m: usize,
    seed: Option<u64>,
    max_tries: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let c = constraint(&a, &b)?;
    let mut rng = stream(seed.unwrap_or(DEFAULT_SEED), Stream::Validation);
    let kde = &kde.inner;
    let out = py
        .detach(|| oracle::rejection_sample(kde, &c, epsilon, &mut rng, m, max_tries))
        .py_err()?;
    Ok(rows(&out.samples))
}

/// Synthetic speed profiles of `n_t + 1` values from piecewise-constant
/// acceleration trajectories.
#[pyfunction]
#[pyo3(signature = (n_vehicles, duration, dt=0.1, n_t=50, stride=None, seed=None))]
fn synthesize_profiles(
    n_vehicles: usize,
    duration: f64,
    dt: f64,
    n_t: usize,
    stride: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Vec<Vec<f64>>> {
    let mut rng = stream(seed.unwrap_or(DEFAULT_SEED), Stream::Corpus);
    let trajs =
        synthesize_trajectories(&mut rng, n_vehicles, duration, dt, &SynthParams::default())
            .py_err()?;
    let mut out = Vec::new();
    for t in &trajs {
        for p in window_profiles(t, dt, n_t, stride.unwrap_or(n_t)).py_err()? {
            out.push(p.speeds().to_vec());
        }
    }
    Ok(out)
}

#[pymodule]
pub fn ckde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kde>()?;
    m.add_class::<ConstrainedSampler>()?;
    m.add_class::<ReducedBasis>()?;
    m.add_function(wrap_pyfunction!(silverman_factor, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(density_line, m)?)?;
    m.add_function(wrap_pyfunction!(line_abscissae, m)?)?;
    m.add_function(wrap_pyfunction!(histogram_distance, m)?)?;
    m.add_function(wrap_pyfunction!(rejection_sample, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_profiles, m)?)?;
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    Ok(())
}
