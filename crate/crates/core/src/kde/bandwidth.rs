use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::data::DataSet;
use crate::error::{Error, Result};
use crate::linalg::{self, check_finite, log_sum_exp, mean_std, quantile_sorted};

/// Symmetric positive-definite kernel covariance with cached inverse,
/// lower Cholesky factor and log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthMatrix {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    lower: DMatrix<f64>,
    log_det: f64,
}

impl BandwidthMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "bandwidth matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_finite(&matrix, "bandwidth matrix")?;
        let asym = linalg::relative_asymmetry(&matrix);
        if asym > 1e-12 {
            return Err(Error::NotPositiveDefinite(format!(
                "relative asymmetry {asym:e} exceeds 1e-12"
            )));
        }
        let matrix = linalg::symmetrize(&matrix);
        let chol = linalg::cholesky(&matrix, "bandwidth matrix")?;
        let inverse = linalg::symmetrize(&chol.inverse());
        let lower = chol.l();
        let log_det = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            matrix,
            inverse,
            lower,
            log_det,
        })
    }

    /// `h^2 * I_d`.
    pub fn isotropic(h: f64, d: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
        Self::new(DMatrix::identity(d, d) * (h * h))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Lower-triangular `L` with `L * L^T = H`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Which columns feed the rule of thumb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SilvermanDims {
    /// Geometric mean of the per-dimension factors.
    All,
    /// Use only this column's spread.
    Index(usize),
}

/// `1.06 * min(sigma, iqr / 1.34) * n^(-1/5)`.
///
/// A zero interquartile range falls back to `sigma` alone.
pub fn silverman_factor(sigma: f64, iqr: f64, n: usize) -> f64 {
    let spread = if iqr > 0.0 {
        sigma.min(iqr / 1.34)
    } else {
        sigma
    };
    1.06 * spread * (n as f64).powf(-0.2)
}

/// Per-dimension Silverman factors computed on the working coordinates.
pub fn silverman_factors(data: &DataSet) -> Result<Vec<f64>> {
    let n = data.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    (0..data.dim())
        .map(|k| {
            let column = data.points().column(k);
            let (_, sigma) = mean_std(column.iter().cloned());
            if !(sigma > 0.0) {
                return Err(Error::DegenerateData(format!(
                    "dimension {k} has zero variance"
                )));
            }
            let mut sorted: Vec<f64> = column.iter().cloned().collect();
            sorted.sort_by(f64::total_cmp);
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            Ok(silverman_factor(sigma, iqr, n))
        })
        .collect()
}

/// Isotropic rule-of-thumb bandwidth `h^2 * I_d`.
pub fn silverman_bandwidth(data: &DataSet, dims: SilvermanDims) -> Result<BandwidthMatrix> {
    let factors = silverman_factors(data)?;
    let h = match dims {
        SilvermanDims::All => {
            (factors.iter().map(|h| h.ln()).sum::<f64>() / factors.len() as f64).exp()
        }
        SilvermanDims::Index(k) => *factors.get(k).ok_or(Error::DimensionMismatch {
            expected: data.dim(),
            got: k,
        })?,
    };
    BandwidthMatrix::isotropic(h, data.dim())
}

/// Squared Euclidean distances between all pairs of rows.
fn pairwise_sq_dist(points: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = points.shape();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for k in 0..d {
                let diff = points[(i, k)] - points[(j, k)];
                s += diff * diff;
            }
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

fn loo_from_distances(sq: &[f64], n: usize, d: usize, h: f64) -> f64 {
    let log_norm = -((n - 1) as f64).ln() - 0.5 * d as f64 * (2.0 * PI).ln() - d as f64 * h.ln();
    let inv = -0.5 / (h * h);
    let mut exps = Vec::with_capacity(n - 1);
    let mut total = 0.0;
    for i in 0..n {
        exps.clear();
        exps.extend((0..n).filter(|&j| j != i).map(|j| sq[i * n + j] * inv));
        total += log_sum_exp(&exps) + log_norm;
    }
    total
}

/// Leave-one-out log-likelihood of the isotropic kernel `h^2 * I`.
pub fn loo_log_likelihood(data: &DataSet, h: f64) -> Result<f64> {
    if data.n() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: data.n(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let sq = pairwise_sq_dist(data.points());
    Ok(loo_from_distances(&sq, data.n(), data.dim(), h))
}

/// Grid search for the isotropic bandwidth maximizing the leave-one-out
/// likelihood; ties go to the smaller candidate.
pub fn loo_cv_bandwidth(data: &DataSet, candidates: &[f64]) -> Result<BandwidthMatrix> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "empty bandwidth candidate list".into(),
        ));
    }
    if let Some(bad) = candidates.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth candidate {bad} is not positive"
        )));
    }
    let n = data.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let sq = pairwise_sq_dist(data.points());
    if sq.iter().all(|s| *s == 0.0) {
        return Err(Error::DegenerateData(
            "all points coincide; the leave-one-out likelihood is unbounded".into(),
        ));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &h in &sorted {
        let ll = loo_from_distances(&sq, n, data.dim(), h);
        if ll > best.0 {
            best = (ll, h);
        }
    }
    BandwidthMatrix::isotropic(best.1, data.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw(values: &[f64]) -> DataSet {
        DataSet::new(DMatrix::from_column_slice(values.len(), 1, values)).unwrap()
    }

    #[test]
    fn silverman_factor_examples() {
        assert_relative_eq!(silverman_factor(1.0, 1.34, 32), 0.53, epsilon = 1e-15);
        assert_relative_eq!(silverman_factor(2.0, 13.4, 32), 1.06, epsilon = 1e-15);
    }

    #[test]
    fn silverman_needs_two_points() {
        assert!(matches!(
            silverman_bandwidth(&raw(&[1.0]), SilvermanDims::All),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn silverman_rejects_constant_dimension() {
        assert!(matches!(
            silverman_bandwidth(&raw(&[3.0, 3.0, 3.0]), SilvermanDims::All),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn silverman_is_translation_invariant() {
        let a = raw(&[0.1, 0.5, 2.0, 3.3, 4.1, 7.0]);
        let b = raw(&[100.1, 100.5, 102.0, 103.3, 104.1, 107.0]);
        let ha = silverman_bandwidth(&a, SilvermanDims::All).unwrap();
        let hb = silverman_bandwidth(&b, SilvermanDims::All).unwrap();
        assert_relative_eq!(
            ha.matrix()[(0, 0)],
            hb.matrix()[(0, 0)],
            max_relative = 1e-10
        );
    }

    #[test]
    fn loo_two_point_example() {
        // Each held-out point sees the other at distance 2:
        // h = 1.0 gives exp(-2)/sqrt(2 pi), h = 0.5 gives exp(-8)/(0.5 sqrt(2 pi)).
        let data = raw(&[-1.0, 1.0]);
        let h = loo_cv_bandwidth(&data, &[0.5, 1.0]).unwrap();
        assert_relative_eq!(h.matrix()[(0, 0)], 1.0);
        let ll = loo_log_likelihood(&data, 1.0).unwrap();
        let expected = 2.0 * ((-2.0f64).exp() / (2.0 * PI).sqrt()).ln();
        assert_relative_eq!(ll, expected, epsilon = 1e-12);
    }

    #[test]
    fn loo_singleton_and_empty_candidates() {
        let data = raw(&[0.0, 1.0, 5.0]);
        let h = loo_cv_bandwidth(&data, &[0.7]).unwrap();
        assert_relative_eq!(h.matrix()[(0, 0)], 0.49, epsilon = 1e-15);
        assert!(matches!(
            loo_cv_bandwidth(&data, &[]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            loo_cv_bandwidth(&raw(&[2.0, 2.0, 2.0]), &[0.5]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn bandwidth_cache_is_consistent() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let bw = BandwidthMatrix::new(h.clone()).unwrap();
        assert!((bw.inverse() * &h - DMatrix::identity(2, 2)).amax() < 1e-10);
        assert_relative_eq!(bw.log_det(), (2.0 * 0.5 - 0.09f64).ln(), epsilon = 1e-10);
        let l = bw.cholesky_factor();
        assert!((l * l.transpose() - h).amax() < 1e-12);
    }

    #[test]
    fn bandwidth_rejects_indefinite_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            BandwidthMatrix::new(bad),
            Err(Error::NotPositiveDefinite(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            BandwidthMatrix::new(asym),
            Err(Error::NotPositiveDefinite(_))
        ));
    }
}
