//! Small dense linear-algebra helpers shared by the estimator and samplers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, QR};

use crate::error::{Error, Result};

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub(crate) fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub(crate) fn check_finite_vec(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Largest absolute asymmetry relative to the largest entry.
pub(crate) fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite(format!("Cholesky factorization of {what} failed"))
    })
}

/// Ratio of the extreme eigenvalues of a symmetric matrix; infinite when the
/// smallest eigenvalue is not positive.
pub(crate) fn spd_condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Orthonormal basis (as columns) of the orthogonal complement of the column
/// span of `basis`, whose columns must already be orthonormal.
pub(crate) fn orthonormal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let d = basis.nrows();
    let r = basis.ncols();
    let mut stacked = DMatrix::<f64>::zeros(d, r + d);
    stacked.view_mut((0, 0), (d, r)).copy_from(basis);
    stacked
        .view_mut((0, r), (d, d))
        .copy_from(&DMatrix::<f64>::identity(d, d));
    let q = QR::new(stacked).q();
    q.columns(r, d - r).into_owned()
}

/// Sample mean and (n - 1)-normalized standard deviation of a column.
pub(crate) fn mean_std(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let std = if n > 1.0 {
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Linear-interpolation quantile with position `(n - 1) * p` on sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (n - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Numerically stable `ln(sum(exp(values)))`.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let v1 = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]) / 2f64.sqrt();
        let v2 = orthonormal_complement(&v1);
        assert_eq!(v2.shape(), (3, 2));
        let gram = v2.transpose() * &v2;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!((v1.transpose() * &v2).amax() < 1e-14);
    }

    #[test]
    fn type7_quantiles() {
        let data = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&data, 0.0), 1.0);
        assert_eq!(quantile_sorted(&data, 1.0), 4.0);
        assert!((quantile_sorted(&data, 0.25) - 1.75).abs() < 1e-15);
        assert!((quantile_sorted(&data, 0.75) - 3.25).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_does_not_underflow() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
