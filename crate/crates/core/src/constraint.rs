//! Linear equality constraints `A x = b` and their SVD split into a fixed
//! component and a free component.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_finite_vec, orthonormal_complement};

/// `A x = b` with `A` of shape `n_c x d`, `1 <= n_c < d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl LinearConstraint {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let (n_c, d) = a.shape();
        if n_c == 0 {
            return Err(Error::InvalidArgument(
                "constraint matrix has no rows".into(),
            ));
        }
        if b.len() != n_c {
            return Err(Error::DimensionMismatch {
                expected: n_c,
                got: b.len(),
            });
        }
        if n_c >= d {
            return Err(Error::OverConstrained { rank: n_c, dim: d });
        }
        check_finite(&a, "constraint matrix")?;
        check_finite_vec(&b, "constraint vector")?;
        Ok(Self { a, b })
    }

    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        let a = DMatrix::from_fn(rows.len(), d, |i, k| rows[i][k]);
        Self::new(a, DVector::from_column_slice(b))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `||A x - b||_2`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).norm()
    }

    /// `||A x - b||_inf`.
    pub fn residual_inf(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).amax()
    }

    /// Default feasibility tolerance `scale * (1 + ||b||)`.
    pub fn tolerance(&self, scale: f64) -> f64 {
        scale * (1.0 + self.b.norm())
    }

    /// Same constraint set with `(A, b)` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.a * factor, &self.b * factor)
    }

    /// The equivalent constraint on `z` where `x = mean + scale .* z`.
    pub fn to_working(&self, mean: &DVector<f64>, scale: &DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() || scale.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: mean.len(),
            });
        }
        let mut a = self.a.clone();
        for (k, mut col) in a.column_iter_mut().enumerate() {
            col *= scale[k];
        }
        let b = &self.b - &self.a * mean;
        Self::new(a, b)
    }
}

/// `A = U diag(sigma) V1^T`, with `V2` completing `V1` to an orthonormal
/// basis and `x_bar = diag(sigma)^-1 U^T b` the fixed rotated component.
///
/// A rank-deficient but consistent `A` keeps only its `rank` nonzero singular
/// directions, so `u` is `n_c x rank`.
#[derive(Debug, Clone)]
pub struct ConstraintDecomposition {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v1: DMatrix<f64>,
    v2: DMatrix<f64>,
    x_bar: DVector<f64>,
}

impl ConstraintDecomposition {
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn v1(&self) -> &DMatrix<f64> {
        &self.v1
    }

    pub fn v2(&self) -> &DMatrix<f64> {
        &self.v2
    }

    /// Full rotation `[V1 V2]`.
    pub fn v(&self) -> DMatrix<f64> {
        let d = self.dim();
        let r = self.rank();
        let mut v = DMatrix::zeros(d, d);
        v.view_mut((0, 0), (d, r)).copy_from(&self.v1);
        v.view_mut((0, r), (d, d - r)).copy_from(&self.v2);
        v
    }

    pub fn x_bar(&self) -> &DVector<f64> {
        &self.x_bar
    }

    /// Number of independent constraints.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn dim(&self) -> usize {
        self.v1.nrows()
    }

    /// Dimension of the free component.
    pub fn free_dim(&self) -> usize {
        self.v2.ncols()
    }

    /// `V1 x_bar + V2 x_tilde`, which satisfies the constraint for any `x_tilde`.
    pub fn embed(&self, x_tilde: &DVector<f64>) -> Result<DVector<f64>> {
        self.reconstruct(&self.x_bar, x_tilde)
    }

    /// `V1 fixed + V2 free` for an arbitrary fixed part.
    pub fn reconstruct(&self, fixed: &DVector<f64>, free: &DVector<f64>) -> Result<DVector<f64>> {
        if fixed.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                got: fixed.len(),
            });
        }
        if free.len() != self.free_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.free_dim(),
                got: free.len(),
            });
        }
        Ok(&self.v1 * fixed + &self.v2 * free)
    }

    /// `(V1^T x, V2^T x)`.
    pub fn split(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok((self.v1.tr_mul(x), self.v2.tr_mul(x)))
    }

    /// Full-rank constraint `diag(sigma) V1^T x = U^T b` with the same solution set.
    pub fn reduced_constraint(&self) -> Result<LinearConstraint> {
        let mut a = self.v1.transpose();
        for (i, mut row) in a.row_iter_mut().enumerate() {
            row *= self.sigma[i];
        }
        let b = self.x_bar.component_mul(&self.sigma);
        LinearConstraint::new(a, b)
    }
}

/// SVD of the constraint matrix, auto-reducing consistent rank-deficient systems.
pub fn decompose(c: &LinearConstraint) -> Result<ConstraintDecomposition> {
    let (n_c, d) = c.a.shape();
    let svd = SVD::new(c.a.clone(), true, true);
    let u_full = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let singular = svd.singular_values;
    let sigma_max = singular.max();
    let threshold = n_c.max(d) as f64 * sigma_max * f64::EPSILON;
    let rank = singular.iter().filter(|s| **s > threshold).count();
    if rank == 0 {
        return Err(Error::InvalidArgument("constraint matrix is zero".into()));
    }
    if rank >= d {
        return Err(Error::OverConstrained { rank, dim: d });
    }

    let ut_b = u_full.tr_mul(&c.b);
    let discarded = ut_b.rows(rank, ut_b.len() - rank).norm();
    if discarded > 1e-8 * (1.0 + c.b.norm()) {
        return Err(Error::InconsistentConstraint {
            residual: discarded,
        });
    }

    let u = u_full.columns(0, rank).into_owned();
    let sigma = singular.rows(0, rank).into_owned();
    let v1 = v_t.rows(0, rank).transpose();
    let v2 = orthonormal_complement(&v1);
    let x_bar = ut_b.rows(0, rank).component_div(&sigma);
    Ok(ConstraintDecomposition {
        u,
        sigma,
        v1,
        v2,
        x_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(rows: &[Vec<f64>], b: &[f64]) -> LinearConstraint {
        LinearConstraint::from_rows(rows, b).unwrap()
    }

    #[test]
    fn speed_drop_constraint() {
        let dec = decompose(&c(&[vec![1.0, -1.0]], &[5.0])).unwrap();
        assert_relative_eq!(dec.sigma()[0], 2f64.sqrt(), epsilon = 1e-14);
        let v1 = dec.v1().column(0);
        let s = v1[0].signum();
        assert_relative_eq!(v1[0] * s, 1.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(v1[1] * s, -1.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(dec.x_bar()[0].abs(), 5.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert!((dec.x_bar()[0].abs() - 3.53553).abs() < 1e-5);

        let p = dec.embed(&DVector::from_element(1, 0.0)).unwrap();
        assert_relative_eq!(p[0], 2.5, epsilon = 1e-12);
        assert_relative_eq!(p[1], -2.5, epsilon = 1e-12);

        let (fixed, free) = dec.split(&DVector::from_vec(vec![5.0, 0.0])).unwrap();
        assert_relative_eq!(fixed[0].abs(), 5.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(free[0].abs(), 5.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn coordinate_constraint_is_identity_rotation() {
        let dec = decompose(&c(&[vec![1.0, 0.0]], &[3.0])).unwrap();
        assert_relative_eq!(dec.sigma()[0], 1.0, epsilon = 1e-15);
        let s = dec.v1()[(0, 0)].signum();
        assert_relative_eq!(dec.x_bar()[0] * s, 3.0, epsilon = 1e-14);
        let t = dec.v2()[(1, 0)].signum();
        let x = dec.embed(&DVector::from_element(1, 7.0 * t)).unwrap();
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 7.0, epsilon = 1e-14);
        let (fixed, free) = dec.split(&DVector::from_vec(vec![3.0, 7.0])).unwrap();
        assert_relative_eq!(fixed[0] * s, 3.0, epsilon = 1e-14);
        assert_relative_eq!(free[0] * t, 7.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_deficient_constraints() {
        let rows = [vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]];
        let dec = decompose(&c(&rows, &[1.0, 2.0])).unwrap();
        assert_eq!(dec.rank(), 1);
        assert_eq!(dec.free_dim(), 2);
        let reduced = dec.reduced_constraint().unwrap();
        let row = reduced.a().row(0);
        let norm = row.norm();
        let s = row[0].signum();
        assert_relative_eq!(row[0] * s / norm, 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(row[1] * s / norm, 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert!(row[2].abs() / norm < 1e-12);
        assert_relative_eq!(
            reduced.b()[0] * s / norm,
            1.0 / 2f64.sqrt(),
            epsilon = 1e-12
        );
        assert_eq!(decompose(&reduced).unwrap().rank(), 1);

        assert!(matches!(
            decompose(&c(&rows, &[1.0, 3.0])),
            Err(Error::InconsistentConstraint { .. })
        ));
    }

    #[test]
    fn square_constraint_is_rejected() {
        let r = LinearConstraint::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::OverConstrained { rank: 2, dim: 2 })));
    }

    #[test]
    fn shape_errors() {
        let dec = decompose(&c(&[vec![1.0, 0.0, 0.0]], &[1.0])).unwrap();
        assert!(matches!(
            dec.embed(&DVector::zeros(1)),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            dec.split(&DVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn factors_are_orthonormal() {
        let rows = [vec![1.0, 2.0, -1.0, 0.5], vec![0.3, -0.2, 4.0, 1.0]];
        let cons = c(&rows, &[1.0, -2.0]);
        let dec = decompose(&cons).unwrap();
        let eye = |n| DMatrix::<f64>::identity(n, n);
        assert!((dec.u().tr_mul(dec.u()) - eye(2)).amax() < 1e-10);
        assert!((dec.v1().tr_mul(dec.v1()) - eye(2)).amax() < 1e-10);
        assert!((dec.v2().tr_mul(dec.v2()) - eye(2)).amax() < 1e-10);
        assert!(dec.v1().tr_mul(dec.v2()).amax() < 1e-10);
        let rebuilt = dec.u() * DMatrix::from_diagonal(dec.sigma()) * dec.v1().transpose();
        assert!((rebuilt - cons.a()).norm() / cons.a().norm() < 1e-10);
        let fixed_point = dec.v1() * dec.x_bar();
        assert!(cons.residual(&fixed_point) < 1e-10 * (1.0 + cons.b().norm()));
        assert!(dec.sigma()[0] >= dec.sigma()[1]);
    }

    fn constraint_strategy() -> impl Strategy<Value = (LinearConstraint, DVector<f64>)> {
        (2usize..=8)
            .prop_flat_map(|d| (Just(d), 1usize..d))
            .prop_flat_map(|(d, n_c)| {
                (
                    proptest::collection::vec(-5.0f64..5.0, n_c * d),
                    proptest::collection::vec(-20.0f64..20.0, n_c),
                    proptest::collection::vec(-50.0f64..50.0, d - n_c),
                    Just((d, n_c)),
                )
            })
            .prop_filter_map("full-rank constraint", |(a, b, free, (d, n_c))| {
                let a = DMatrix::from_row_slice(n_c, d, &a);
                let c = LinearConstraint::new(a, DVector::from_vec(b)).ok()?;
                let dec = decompose(&c).ok()?;
                (dec.rank() == n_c && dec.sigma().min() > 1e-3).then_some(())?;
                Some((c, DVector::from_vec(free)))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn embedded_points_satisfy_constraint((cons, free) in constraint_strategy()) {
            let dec = decompose(&cons).unwrap();
            let x = dec.embed(&free).unwrap();
            prop_assert!(cons.residual(&x) <= 1e-9 * (1.0 + cons.b().norm()));
        }

        #[test]
        fn split_then_reconstruct_round_trips(
            (cons, _free) in constraint_strategy(),
            seed in proptest::collection::vec(-10.0f64..10.0, 8),
        ) {
            let dec = decompose(&cons).unwrap();
            let x = DVector::from_iterator(cons.dim(), seed.into_iter().take(cons.dim()));
            let (fixed, free) = dec.split(&x).unwrap();
            let back = dec.reconstruct(&fixed, &free).unwrap();
            prop_assert!((back - x).amax() < 1e-10);
        }

        #[test]
        fn sign_flip_leaves_embedding_set_unchanged((cons, free) in constraint_strategy()) {
            // Flipping (U, V1) together flips x_bar's sign so V1 x_bar is unchanged.
            let dec = decompose(&cons).unwrap();
            let flipped = ConstraintDecomposition {
                u: -dec.u.clone(),
                sigma: dec.sigma.clone(),
                v1: -dec.v1.clone(),
                v2: -dec.v2.clone(),
                x_bar: dec.u.tr_mul(cons.b()).component_div(&dec.sigma) * -1.0,
            };
            let a = dec.embed(&free).unwrap();
            let b = flipped.embed(&(-free)).unwrap();
            prop_assert!((a - b).amax() < 1e-9);
        }
    }
}
