use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, mean_std};

/// Observation matrix (one point per row) in the estimator's working
/// coordinates, together with the per-dimension affine map back to raw units.
///
/// For a standardized set the working coordinates are `(x - mean) / std`; for
/// a raw set `mean = 0` and `std = 1` so the map is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    points: DMatrix<f64>,
    mean: DVector<f64>,
    std: DVector<f64>,
    standardized: bool,
}

impl DataSet {
    /// Wraps raw points without rescaling. A single point is allowed here
    /// since an explicit bandwidth does not need spread statistics.
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        validate_shape(&points, 1)?;
        let d = points.ncols();
        Ok(Self {
            points,
            mean: DVector::zeros(d),
            std: DVector::from_element(d, 1.0),
            standardized: false,
        })
    }

    /// Standardizes each column to zero mean and unit sample standard deviation.
    pub fn standardized(raw: DMatrix<f64>) -> Result<Self> {
        validate_shape(&raw, 2)?;
        let (n, d) = raw.shape();
        let mut mean = DVector::zeros(d);
        let mut std = DVector::zeros(d);
        for k in 0..d {
            let (m, s) = mean_std(raw.column(k).iter().cloned());
            if !(s > 0.0) {
                return Err(Error::DegenerateData(format!(
                    "dimension {k} has zero variance"
                )));
            }
            mean[k] = m;
            std[k] = s;
        }
        let points = DMatrix::from_fn(n, d, |i, k| (raw[(i, k)] - mean[k]) / std[k]);
        Ok(Self {
            points,
            mean,
            std,
            standardized: true,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        Ok(DMatrix::from_fn(rows.len(), d, |i, k| rows[i][k]))
    }

    /// Points in working coordinates.
    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn std(&self) -> &DVector<f64> {
        &self.std
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn to_raw(&self, working: &DVector<f64>) -> DVector<f64> {
        working.component_mul(&self.std) + &self.mean
    }

    pub fn to_working(&self, raw: &DVector<f64>) -> DVector<f64> {
        (raw - &self.mean).component_div(&self.std)
    }

    /// Row-wise `to_raw` for a sample matrix.
    pub fn rows_to_raw(&self, working: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(working.nrows(), working.ncols(), |i, k| {
            working[(i, k)] * self.std[k] + self.mean[k]
        })
    }

    pub fn raw_points(&self) -> DMatrix<f64> {
        self.rows_to_raw(&self.points)
    }

    /// `ln |det|` of the raw-to-working map; raw densities are working
    /// densities times `exp(-log_scale())`.
    pub fn log_scale(&self) -> f64 {
        self.std.iter().map(|s| s.ln()).sum()
    }
}

fn validate_shape(points: &DMatrix<f64>, min_rows: usize) -> Result<()> {
    if points.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "data must have at least one column".into(),
        ));
    }
    if points.nrows() < min_rows {
        return Err(Error::TooFewPoints {
            needed: min_rows,
            got: points.nrows(),
        });
    }
    check_finite(points, "data points")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mean_std;

    #[test]
    fn standardized_columns_have_unit_spread() {
        let raw = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 30.0, 4.0, 20.0, 8.0, 60.0]);
        let ds = DataSet::standardized(raw.clone()).unwrap();
        for k in 0..2 {
            let (m, s) = mean_std(ds.points().column(k).iter().cloned());
            assert!(m.abs() < 1e-12);
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!((ds.raw_points() - raw).amax() < 1e-12);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let raw = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        assert!(matches!(
            DataSet::standardized(raw),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        let raw = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        assert!(matches!(DataSet::new(raw), Err(Error::NonFinite(_))));
        let one = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(matches!(
            DataSet::standardized(one),
            Err(Error::TooFewPoints { needed: 2, got: 1 })
        ));
    }
}
