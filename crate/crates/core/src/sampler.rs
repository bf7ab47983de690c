//! Exact sampling from a Gaussian KDE restricted to `A x = b`.
//!
//! After rotating into the constraint's singular basis, each kernel factors
//! into a weight that depends only on the fixed component and a Gaussian in
//! the free component with covariance `Q22^-1` and a per-point translated
//! mean. Drawing is then a weighted categorical choice followed by one
//! Gaussian draw.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::alias::AliasTable;
use crate::constraint::{decompose, ConstraintDecomposition, LinearConstraint};
use crate::error::{Error, Result};
use crate::kde::GaussianKde;
use crate::linalg::{self, spd_condition_number, symmetrize};

/// Condition number of `Q22` beyond which preparation refuses to continue.
pub const MAX_FREE_CONDITION: f64 = 1e12;

/// ESS below which diagnostics flag the constraint as far from the data.
pub const LOW_ESS: f64 = 10.0;

/// Blocks of `V^T H^-1 V` split at the constraint rank, plus the Schur
/// complement of `Q22`.
#[derive(Debug, Clone)]
pub struct RotatedPrecision {
    q11: DMatrix<f64>,
    q12: DMatrix<f64>,
    q21: DMatrix<f64>,
    q22: DMatrix<f64>,
    schur: DMatrix<f64>,
    chol_q22: DMatrix<f64>,
    // Q22^-1 Q21
    gain: DMatrix<f64>,
}

impl RotatedPrecision {
    fn new(dec: &ConstraintDecomposition, h_inverse: &DMatrix<f64>) -> Result<Self> {
        let v = dec.v();
        let rotated = symmetrize(&(v.transpose() * h_inverse * &v));
        let d = dec.dim();
        let r = dec.rank();
        let f = d - r;
        let q11 = rotated.view((0, 0), (r, r)).into_owned();
        let q12 = rotated.view((0, r), (r, f)).into_owned();
        let q21 = rotated.view((r, 0), (f, r)).into_owned();
        let q22 = rotated.view((r, r), (f, f)).into_owned();

        let cond = spd_condition_number(&q22);
        if cond > MAX_FREE_CONDITION {
            return Err(Error::NumericalBreakdown(format!(
                "free-block precision has condition number {cond:e}"
            )));
        }
        let chol = linalg::cholesky(&q22, "free-block precision").map_err(|_| {
            Error::NumericalBreakdown("Cholesky of the free-block precision failed".into())
        })?;
        let gain = chol.solve(&q21);
        let schur = symmetrize(&(&q11 - &q12 * &gain));
        if linalg::cholesky(&schur, "Schur complement").is_err() {
            return Err(Error::NumericalBreakdown(
                "Schur complement is not positive definite".into(),
            ));
        }
        Ok(Self {
            q11,
            q12,
            q21,
            q22,
            schur,
            chol_q22: chol.l(),
            gain,
        })
    }

    pub fn q11(&self) -> &DMatrix<f64> {
        &self.q11
    }

    pub fn q12(&self) -> &DMatrix<f64> {
        &self.q12
    }

    pub fn q21(&self) -> &DMatrix<f64> {
        &self.q21
    }

    pub fn q22(&self) -> &DMatrix<f64> {
        &self.q22
    }

    /// `Q11 - Q12 Q22^-1 Q21`.
    pub fn schur(&self) -> &DMatrix<f64> {
        &self.schur
    }

    /// Lower Cholesky factor of `Q22`.
    pub fn chol_q22(&self) -> &DMatrix<f64> {
        &self.chol_q22
    }

    /// `Q22^-1 Q21`.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    /// Covariance of the free component, `Q22^-1`.
    pub fn free_covariance(&self) -> DMatrix<f64> {
        let n = self.q22.nrows();
        let mut inv = DMatrix::identity(n, n);
        self.chol_q22.solve_lower_triangular_mut(&mut inv);
        self.chol_q22.tr_solve_lower_triangular_mut(&mut inv);
        symmetrize(&inv)
    }
}

/// Everything needed to draw constrained samples repeatedly; immutable.
#[derive(Debug, Clone)]
pub struct SamplerState {
    raw_constraint: LinearConstraint,
    working_constraint: LinearConstraint,
    dec: ConstraintDecomposition,
    prec: RotatedPrecision,
    log_weights: DVector<f64>,
    max_log_weight: f64,
    alias: AliasTable,
    translated_means: DMatrix<f64>,
    fixed_point: DVector<f64>,
    mean_shift: DVector<f64>,
    scale: DVector<f64>,
}

/// Summary of how well the constraint overlaps the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `(sum w)^2 / sum w^2`.
    pub ess: f64,
    /// Largest log-weight before the max-shift.
    pub max_log_weight: f64,
    /// Shifted weights above `1e-12`.
    pub active_weights: usize,
    pub low_ess: bool,
    /// Every unshifted weight is below `1e-300`.
    pub underflow: bool,
}

impl Diagnostics {
    pub fn has_warning(&self) -> bool {
        self.low_ess || self.underflow
    }
}

/// Precomputes rotation, precision blocks, weights, alias table and
/// translated means for `c` (given in raw units) on `kde`.
pub fn prepare(kde: &GaussianKde, c: &LinearConstraint) -> Result<SamplerState> {
    if c.dim() != kde.dim() {
        return Err(Error::DimensionMismatch {
            expected: kde.dim(),
            got: c.dim(),
        });
    }
    let data = kde.data();
    let working_constraint = c.to_working(data.mean(), data.std())?;
    let dec = decompose(&working_constraint)?;
    let prec = RotatedPrecision::new(&dec, kde.bandwidth().inverse())?;

    let points = data.points();
    let n = points.nrows();
    let fixed_parts = points * dec.v1();
    let free_parts = points * dec.v2();
    let x_bar = dec.x_bar();
    let deltas = DMatrix::from_fn(n, dec.rank(), |i, k| x_bar[k] - fixed_parts[(i, k)]);
    let translated_means = free_parts - &deltas * prec.gain.transpose();

    let projected = &deltas * &prec.schur;
    let raw_log_weights = DVector::from_fn(n, |i, _| -0.5 * projected.row(i).dot(&deltas.row(i)));
    let max_log_weight = raw_log_weights.max();
    if !max_log_weight.is_finite() {
        return Err(Error::NumericalBreakdown("non-finite log-weights".into()));
    }
    let log_weights = raw_log_weights.add_scalar(-max_log_weight);
    let weights: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();
    let alias = AliasTable::new(&weights)?;
    let fixed_point = dec.v1() * x_bar;

    Ok(SamplerState {
        raw_constraint: c.clone(),
        working_constraint,
        dec,
        prec,
        log_weights,
        max_log_weight,
        alias,
        translated_means,
        fixed_point,
        mean_shift: data.mean().clone(),
        scale: data.std().clone(),
    })
}

impl SamplerState {
    pub fn constraint(&self) -> &LinearConstraint {
        &self.raw_constraint
    }

    /// The constraint expressed in the estimator's working coordinates.
    pub fn working_constraint(&self) -> &LinearConstraint {
        &self.working_constraint
    }

    pub fn decomposition(&self) -> &ConstraintDecomposition {
        &self.dec
    }

    pub fn precision(&self) -> &RotatedPrecision {
        &self.prec
    }

    /// Log-weights shifted so the largest is zero.
    pub fn log_weights(&self) -> &DVector<f64> {
        &self.log_weights
    }

    /// Unshifted log-weights `-1/2 (x_bar - x_bar_i)^T Q_S (x_bar - x_bar_i)`.
    pub fn raw_log_weights(&self) -> DVector<f64> {
        self.log_weights.add_scalar(self.max_log_weight)
    }

    /// Weights normalized to sum to one.
    pub fn normalized_weights(&self) -> DVector<f64> {
        let w = self.log_weights.map(f64::exp);
        let total = w.sum();
        w / total
    }

    pub fn alias_table(&self) -> &AliasTable {
        &self.alias
    }

    /// Row `i` is the mean of the free component given kernel `i`.
    pub fn translated_means(&self) -> &DMatrix<f64> {
        &self.translated_means
    }

    pub fn dim(&self) -> usize {
        self.dec.dim()
    }

    /// One draw in working coordinates.
    pub fn draw_working<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let j = self.alias.sample(rng);
        let f = self.dec.free_dim();
        let mut offset = DVector::from_fn(f, |_, _| rng.sample::<f64, _>(StandardNormal));
        // L^T y = z gives y with covariance Q22^-1
        self.prec
            .chol_q22
            .tr_solve_lower_triangular_mut(&mut offset);
        let free = self.translated_means.row(j).transpose() + offset;
        &self.fixed_point + self.dec.v2() * free
    }

    /// One draw in raw units; satisfies the raw constraint up to rounding.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        self.draw_working(rng).component_mul(&self.scale) + &self.mean_shift
    }

    /// `m` independent draws, one per row, in raw units.
    pub fn draw_many<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(m, d);
        for i in 0..m {
            let x = self.draw(rng);
            for k in 0..d {
                out[(i, k)] = x[k];
            }
        }
        out
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let w: Vec<f64> = self.log_weights.iter().map(|l| l.exp()).collect();
        let sum: f64 = w.iter().sum();
        let sum_sq: f64 = w.iter().map(|v| v * v).sum();
        let ess = sum * sum / sum_sq;
        Diagnostics {
            ess,
            max_log_weight: self.max_log_weight,
            active_weights: w.iter().filter(|v| **v > 1e-12).count(),
            low_ess: ess < LOW_ESS,
            underflow: self.max_log_weight < 1e-300f64.ln(),
        }
    }
}
