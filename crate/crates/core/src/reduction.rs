//! Truncated-SVD parameter reduction for high-dimensional scenario vectors,
//! and endpoint constraints expressed in the reduced coordinates.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::constraint::LinearConstraint;
use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_finite_vec};

/// Affine map `x = UB1 diag(SB1) v + mu` between reduced coordinates `v`
/// and full parameter vectors `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    mu: DVector<f64>,
    ub1: DMatrix<f64>,
    sb1: DVector<f64>,
}

/// Which pair of speed-profile entries an endpoint constraint pins down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointKind {
    /// `(v_init, a_init)`: first entry and forward-difference acceleration.
    InitSpeedAccel,
    /// `(v_init, v_end)`: first and last entries.
    InitEndSpeed,
}

/// Fits the basis on the rows of `raw` and returns it with the reduced
/// coordinates of every row.
pub fn fit(raw: &DMatrix<f64>, d_red: usize) -> Result<(ReducedBasis, DMatrix<f64>)> {
    let (n, full) = raw.shape();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if d_red == 0 || d_red > n.min(full) {
        return Err(Error::InvalidArgument(format!(
            "reduced dimension {d_red} outside 1..={}",
            n.min(full)
        )));
    }
    check_finite(raw, "parameter vectors")?;
    let mu = raw.row_mean().transpose();
    let centered = DMatrix::from_fn(n, full, |i, k| raw[(i, k)] - mu[k]);
    let svd = SVD::new(centered.clone(), false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let singular = svd.singular_values;
    let tol = n.max(full) as f64 * singular.max() * f64::EPSILON;
    if !(singular[d_red - 1] > tol) {
        return Err(Error::DegenerateData(format!(
            "centered data has rank below {d_red} (singular value {:e})",
            singular[d_red - 1]
        )));
    }
    let basis = ReducedBasis {
        mu,
        ub1: v_t.rows(0, d_red).transpose(),
        sb1: singular.rows(0, d_red).into_owned(),
    };
    let coords = basis.encode_centered_rows(&centered);
    Ok((basis, coords))
}

impl ReducedBasis {
    pub fn new(mu: DVector<f64>, ub1: DMatrix<f64>, sb1: DVector<f64>) -> Result<Self> {
        if ub1.nrows() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: ub1.nrows(),
            });
        }
        if ub1.ncols() != sb1.len() || sb1.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: ub1.ncols(),
                got: sb1.len(),
            });
        }
        check_finite_vec(&mu, "basis mean")?;
        check_finite(&ub1, "basis vectors")?;
        check_finite_vec(&sb1, "singular values")?;
        if sb1.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidArgument(
                "singular values must be positive".into(),
            ));
        }
        if sb1.as_slice().windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "singular values must be non-increasing".into(),
            ));
        }
        let gram = ub1.tr_mul(&ub1);
        if (gram - DMatrix::identity(sb1.len(), sb1.len())).amax() > 1e-10 {
            return Err(Error::InvalidArgument(
                "basis vectors are not orthonormal".into(),
            ));
        }
        Ok(Self { mu, ub1, sb1 })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn ub1(&self) -> &DMatrix<f64> {
        &self.ub1
    }

    pub fn sb1(&self) -> &DVector<f64> {
        &self.sb1
    }

    /// Length of the full parameter vectors.
    pub fn full_dim(&self) -> usize {
        self.mu.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.sb1.len()
    }

    /// `diag(SB1)^-1 UB1^T (x - mu)`.
    pub fn encode(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.full_dim(),
                got: x.len(),
            });
        }
        Ok(self.ub1.tr_mul(&(x - &self.mu)).component_div(&self.sb1))
    }

    /// `UB1 diag(SB1) v + mu`.
    pub fn decode(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.reduced_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.reduced_dim(),
                got: v.len(),
            });
        }
        Ok(&self.ub1 * v.component_mul(&self.sb1) + &self.mu)
    }

    pub fn encode_rows(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if raw.ncols() != self.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.full_dim(),
                got: raw.ncols(),
            });
        }
        let centered = DMatrix::from_fn(raw.nrows(), raw.ncols(), |i, k| raw[(i, k)] - self.mu[k]);
        Ok(self.encode_centered_rows(&centered))
    }

    fn encode_centered_rows(&self, centered: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coords = centered * &self.ub1;
        for (k, mut col) in coords.column_iter_mut().enumerate() {
            col /= self.sb1[k];
        }
        coords
    }

    pub fn decode_rows(&self, reduced: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if reduced.ncols() != self.reduced_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.reduced_dim(),
                got: reduced.ncols(),
            });
        }
        let scaled = DMatrix::from_fn(reduced.nrows(), reduced.ncols(), |i, k| {
            reduced[(i, k)] * self.sb1[k]
        });
        let mut out = scaled * self.ub1.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mu.transpose();
        }
        Ok(out)
    }

    /// Constraint on reduced coordinates fixing two entries of the decoded
    /// speed profile: `(v_init, a_init)` with the acceleration taken as the
    /// forward difference over `dt`, or `(v_init, v_end)`.
    pub fn endpoint_constraint(
        &self,
        kind: EndpointKind,
        values: (f64, f64),
        dt: f64,
    ) -> Result<LinearConstraint> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let full = self.full_dim();
        if full < 2 {
            return Err(Error::InvalidArgument(
                "profiles need at least two entries".into(),
            ));
        }
        let (v_init, second) = values;
        let (second_row, second_target) = match kind {
            EndpointKind::InitSpeedAccel => (1, v_init + dt * second),
            EndpointKind::InitEndSpeed => (full - 1, second),
        };
        let d = self.reduced_dim();
        let a = DMatrix::from_fn(2, d, |i, k| {
            let row = if i == 0 { 0 } else { second_row };
            self.ub1[(row, k)] * self.sb1[k]
        });
        let b = DVector::from_vec(vec![
            v_init - self.mu[0],
            second_target - self.mu[second_row],
        ]);
        LinearConstraint::new(a, b)
    }

    /// Maps `A x = b` on full vectors to `A UB1 diag(SB1) v = b - A mu`.
    pub fn reduce_constraint(&self, c: &LinearConstraint) -> Result<LinearConstraint> {
        if c.dim() != self.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.full_dim(),
                got: c.dim(),
            });
        }
        let mut a = c.a() * &self.ub1;
        for (k, mut col) in a.column_iter_mut().enumerate() {
            col *= self.sb1[k];
        }
        LinearConstraint::new(a, c.b() - c.a() * &self.mu)
    }

    pub fn to_file(&self) -> BasisFile {
        BasisFile {
            mu: self.mu.iter().cloned().collect(),
            ub1: self.ub1.transpose().iter().cloned().collect(),
            sb1: self.sb1.iter().cloned().collect(),
            d_red: self.reduced_dim(),
        }
    }

    pub fn from_file(file: &BasisFile) -> Result<Self> {
        let full = file.mu.len();
        if file.ub1.len() != full * file.d_red {
            return Err(Error::DimensionMismatch {
                expected: full * file.d_red,
                got: file.ub1.len(),
            });
        }
        Self::new(
            DVector::from_column_slice(&file.mu),
            DMatrix::from_row_slice(full, file.d_red, &file.ub1),
            DVector::from_column_slice(&file.sb1),
        )
    }
}

/// JSON form of a basis; `UB1` is stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFile {
    pub mu: Vec<f64>,
    #[serde(rename = "UB1")]
    pub ub1: Vec<f64>,
    #[serde(rename = "SB1")]
    pub sb1: Vec<f64>,
    pub d_red: usize,
}
