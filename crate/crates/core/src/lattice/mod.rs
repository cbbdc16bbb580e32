//! Lattice bases and the operations the identification pipeline is built on.
//!
//! A lattice here is the set of integer combinations of a basis of linearly
//! independent columns. The identification problem reduces to constructing
//! the smallest lattice containing a set of observed vectors and then
//! massaging its basis into an orthogonal-column form.

mod hnf;
mod lll;
mod merge;

pub use hnf::{hnf_exact, RationalMatrix};
pub use lll::lll_reduce;
pub(crate) use lll::{lagrange_sweep, max_relative_off_diagonal};
pub use merge::{lattice_from_generators, merge_vector, MergeOutcome};

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::qr::{singular_values, ColPivQr};
use crate::scalar::{cast, Scalar};

/// Numerical slack for the floating-point lattice pipeline.
///
/// The underlying model is exact; these only absorb roundoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Largest deviation of a coordinate from the nearest integer that still
    /// counts as lattice membership.
    pub integrality_tol: T,
    /// Relative singular-value threshold below which columns are treated as
    /// dependent.
    pub rank_tol: T,
    /// Relative Gram off-diagonal threshold for calling a basis orthogonal.
    pub orth_tol: T,
}

impl<T: Scalar> Tolerances<T> {
    pub fn new(integrality_tol: T, rank_tol: T, orth_tol: T) -> Result<Self> {
        let half = cast::<T>(0.5);
        for (name, v) in [
            ("integrality_tol", integrality_tol),
            ("rank_tol", rank_tol),
            ("orth_tol", orth_tol),
        ] {
            if !(v > T::zero() && v < half) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie strictly between 0 and 0.5, got {v}"
                )));
            }
        }
        Ok(Tolerances {
            integrality_tol,
            rank_tol,
            orth_tol,
        })
    }
}

impl<T: Scalar> Default for Tolerances<T> {
    /// Noiseless double-precision data leaves residuals far below these;
    /// they reject genuinely off-lattice vectors without admitting
    /// sub-lattices.
    fn default() -> Self {
        Tolerances {
            integrality_tol: cast(1e-6),
            rank_tol: cast(1e-10),
            orth_tol: cast(1e-8),
        }
    }
}

/// Basis of a lattice: `rank` independent columns in an `ambient_dim`
/// dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis<T> {
    columns: Matrix<T>,
}

impl<T: Scalar> LatticeBasis<T> {
    /// Validates independence (smallest/largest singular value above
    /// `rank_tol`) and finiteness.
    pub fn new(columns: Matrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        columns.validate_finite("lattice basis")?;
        if columns.cols() > columns.rows() {
            return Err(Error::DimensionMismatch {
                context: "LatticeBasis::new (rank exceeds ambient dimension)",
                expected: columns.rows(),
                got: columns.cols(),
            });
        }
        let sv = singular_values(&columns);
        let largest = sv[0];
        let smallest = sv[sv.len() - 1];
        if largest == T::zero() || smallest <= tol.rank_tol * largest {
            let rank = sv.iter().filter(|&&s| s > tol.rank_tol * largest).count();
            return Err(Error::RankDeficient {
                ambient_dim: columns.rows(),
                rank,
            });
        }
        Ok(LatticeBasis { columns })
    }

    /// Constructor for algorithm internals that maintain independence
    /// themselves.
    pub(crate) fn from_columns_unchecked(columns: Matrix<T>) -> Self {
        debug_assert!(columns.is_finite());
        LatticeBasis { columns }
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.rows()
    }

    pub fn rank(&self) -> usize {
        self.columns.cols()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.ambient_dim()
    }

    pub fn columns(&self) -> &Matrix<T> {
        &self.columns
    }

    pub fn column_norms(&self) -> Vec<T> {
        self.columns.columns().map(norm).collect()
    }

    pub fn max_column_norm(&self) -> T {
        self.column_norms()
            .into_iter()
            .fold(T::zero(), T::max)
    }

    /// Lattice covolume: the product of the QR diagonal magnitudes.
    pub fn determinant(&self) -> T {
        ColPivQr::factor(&self.columns).abs_det()
    }

    /// Least-squares coordinates of `v` in this basis and the distance from
    /// `v` to the basis span.
    pub fn solve_coordinates(&self, v: &[T]) -> Result<(Vec<T>, T)> {
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "solve_coordinates",
                expected: self.ambient_dim(),
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("solve_coordinates input"));
        }
        let coeffs = ColPivQr::factor(&self.columns).solve_least_squares(v)?;
        let fit = self.columns.matvec(&coeffs);
        let residual = v
            .iter()
            .zip(&fit)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt();
        Ok((coeffs, residual))
    }

    /// Whether `v` is a lattice point: the residual must vanish relative to
    /// the column scale and every coordinate must sit on an integer.
    /// Membership is only supported on full-rank bases.
    pub fn contains(&self, v: &[T], tol: &Tolerances<T>) -> Result<bool> {
        self.require_full_rank()?;
        let (coeffs, residual) = self.solve_coordinates(v)?;
        let scale = self.max_column_norm();
        if residual > tol.integrality_tol * scale {
            return Ok(false);
        }
        Ok(coeffs
            .iter()
            .all(|&c| (c - c.round_half_even()).abs() <= tol.integrality_tol))
    }

    /// Largest integrality deviation over `vectors`: the max over inputs of
    /// `max(residual / column scale, max_k |coeff_k − round(coeff_k)|)`.
    pub fn max_membership_deviation(&self, vectors: &[Vec<T>]) -> Result<T> {
        self.require_full_rank()?;
        let scale = self.max_column_norm();
        let mut worst = T::zero();
        for v in vectors {
            let (coeffs, residual) = self.solve_coordinates(v)?;
            let frac = coeffs
                .iter()
                .map(|&c| (c - c.round_half_even()).abs())
                .fold(T::zero(), T::max);
            worst = worst.max(frac).max(residual / scale);
        }
        Ok(worst)
    }

    /// True when both bases generate the same lattice: every column of each
    /// is a lattice point of the other.
    pub fn same_lattice(&self, other: &LatticeBasis<T>, tol: &Tolerances<T>) -> Result<bool> {
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "same_lattice",
                expected: self.ambient_dim(),
                got: other.ambient_dim(),
            });
        }
        for col in other.columns.columns() {
            if !self.contains(col, tol)? {
                return Ok(false);
            }
        }
        for col in self.columns.columns() {
            if !other.contains(col, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn require_full_rank(&self) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(Error::RankDeficient {
                ambient_dim: self.ambient_dim(),
                rank: self.rank(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    fn basis(cols: &[Vec<f64>]) -> LatticeBasis<f64> {
        LatticeBasis::new(Matrix::from_columns(cols).unwrap(), &tol()).unwrap()
    }

    #[test]
    fn tolerances_reject_out_of_range() {
        assert!(Tolerances::new(0.5, 1e-10, 1e-8).is_err());
        assert!(Tolerances::new(1e-6, 0.0, 1e-8).is_err());
        assert!(Tolerances::new(1e-6, 1e-10, -1.0).is_err());
        assert!(Tolerances::new(1e-6, 1e-10, 1e-8).is_ok());
    }

    #[test]
    fn dependent_columns_rejected() {
        let m = Matrix::from_columns(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match LatticeBasis::new(m, &tol()) {
            Err(Error::RankDeficient { ambient_dim, rank }) => {
                assert_eq!(ambient_dim, 2);
                assert_eq!(rank, 1);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn solve_coordinates_identity() {
        let b = basis(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (c, r) = b.solve_coordinates(&[3.0, -2.0]).unwrap();
        assert_eq!(c, vec![3.0, -2.0]);
        assert!(r < 1e-14);
    }

    #[test]
    fn solve_coordinates_diagonal() {
        let b = basis(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let (c, r) = b.solve_coordinates(&[1.0, 1.0]).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-14 && (c[1] - 0.5).abs() < 1e-14);
        assert!(r < 1e-14);
    }

    #[test]
    fn solve_coordinates_partial_rank_residual() {
        let m = Matrix::from_columns(&[vec![1.0, 0.0]]).unwrap();
        let b = LatticeBasis::new(m, &tol()).unwrap();
        let (c, r) = b.solve_coordinates(&[2.0, 5.0]).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-14);
        assert!((r - 5.0).abs() < 1e-14);
    }

    #[test]
    fn contains_scaled_axes() {
        let b = basis(&[vec![1.0, 0.0], vec![0.0, 0.5]]);
        assert!(b.contains(&[3.0, 1.5], &tol()).unwrap());
        assert!(!b.contains(&[3.0, 1.25], &tol()).unwrap());
    }

    #[test]
    fn contains_integer_combination() {
        // (0,2) = -1·(2,0) + 2·(1,1)
        let b = basis(&[vec![2.0, 0.0], vec![1.0, 1.0]]);
        assert!(b.contains(&[0.0, 2.0], &tol()).unwrap());
    }

    #[test]
    fn contains_requires_full_rank() {
        let m = Matrix::from_columns(&[vec![1.0, 0.0]]).unwrap();
        let b = LatticeBasis::new(m, &tol()).unwrap();
        assert!(matches!(
            b.contains(&[1.0, 0.0], &tol()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn determinant_examples() {
        assert!((basis(&[vec![1.0, 0.0], vec![0.0, 0.5]]).determinant() - 0.5).abs() < 1e-14);
        assert!((basis(&[vec![2.0, 0.0], vec![1.0, 1.0]]).determinant() - 2.0).abs() < 1e-12);
        let eye5: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        assert!((basis(&eye5).determinant() - 1.0).abs() < 1e-12);
    }
}
