//! Gaussian kernel density estimation: data handling, bandwidth selection,
//! density evaluation and unconstrained sampling.

mod bandwidth;
mod data;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub use bandwidth::{
    loo_cv_bandwidth, loo_log_likelihood, silverman_bandwidth, silverman_factor, silverman_factors,
    BandwidthMatrix, SilvermanDims,
};
pub use data::DataSet;

use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

/// Gaussian KDE `f(x) = C * sum_i exp(-1/2 (x - x_i)^T H^-1 (x - x_i))` with
/// `C = 1 / (N (2 pi)^(d/2) det(H)^(1/2))`.
///
/// `H` acts on the data set's working coordinates. Public evaluation and
/// sampling take and return raw units.
#[derive(Debug, Clone)]
pub struct GaussianKde {
    data: DataSet,
    bandwidth: BandwidthMatrix,
    log_norm_const: f64,
    // rows are L^-1 x_i, so quadratic forms reduce to squared distances
    whitened: DMatrix<f64>,
}

impl GaussianKde {
    pub fn new(data: DataSet, bandwidth: BandwidthMatrix) -> Result<Self> {
        if bandwidth.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: bandwidth.dim(),
            });
        }
        let (n, d) = (data.n(), data.dim());
        let log_norm_const =
            -(n as f64).ln() - 0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * bandwidth.log_det();
        let lower = bandwidth.cholesky_factor();
        let mut whitened = data.points().transpose();
        lower.solve_lower_triangular_mut(&mut whitened);
        Ok(Self {
            data,
            bandwidth,
            log_norm_const,
            whitened: whitened.transpose(),
        })
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn bandwidth(&self) -> &BandwidthMatrix {
        &self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// The constant `C` in working coordinates.
    pub fn norm_const(&self) -> f64 {
        self.log_norm_const.exp()
    }

    /// Log density at a point given in working coordinates.
    pub fn log_density_working(&self, z: &DVector<f64>) -> Result<f64> {
        self.check_len(z.len())?;
        let mut w = z.clone();
        self.bandwidth
            .cholesky_factor()
            .solve_lower_triangular_mut(&mut w);
        let exponents: Vec<f64> = self
            .whitened
            .row_iter()
            .map(|row| {
                let mut s = 0.0;
                for (a, b) in row.iter().zip(w.iter()) {
                    s += (a - b) * (a - b);
                }
                -0.5 * s
            })
            .collect();
        Ok(self.log_norm_const + log_sum_exp(&exponents))
    }

    /// Log density in raw units.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_len(x.len())?;
        let z = self.data.to_working(x);
        Ok(self.log_density_working(&z)? - self.data.log_scale())
    }

    /// Density in raw units.
    pub fn density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// `m` draws in working coordinates: a uniformly chosen data point plus
    /// `L z` with `L L^T = H`.
    pub fn sample_working<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> DMatrix<f64> {
        let (n, d) = (self.data.n(), self.dim());
        let lower = self.bandwidth.cholesky_factor();
        let mut out = DMatrix::zeros(m, d);
        let mut z = DVector::zeros(d);
        for row in 0..m {
            let j = rng.random_range(0..n);
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let offset = lower * &z;
            for k in 0..d {
                out[(row, k)] = self.data.points()[(j, k)] + offset[k];
            }
        }
        out
    }

    /// `m` unconstrained draws in raw units.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> DMatrix<f64> {
        let working = self.sample_working(rng, m);
        self.data.rows_to_raw(&working)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }
}
