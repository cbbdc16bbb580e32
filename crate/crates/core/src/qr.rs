//! Householder QR with column pivoting and a one-sided Jacobi SVD.
//!
//! Coordinate solves against lattice bases go through least squares on this
//! factorization — merge intermediates can be badly conditioned, so normal
//! equations are never formed.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::scalar::{cast, Scalar};

/// Column-pivoted Householder factorization `A·P = Q·R`.
#[derive(Debug, Clone)]
pub struct ColPivQr<T> {
    r: Matrix<T>,
    reflectors: Vec<Vec<T>>,
    betas: Vec<T>,
    perm: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> ColPivQr<T> {
    pub fn factor(a: &Matrix<T>) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::with_capacity(n.min(m));
        let mut betas = Vec::with_capacity(n.min(m));

        for k in 0..n.min(m) {
            // pivot on the column with the largest remaining norm
            let mut best = k;
            let mut best_norm = tail_norm(&work, k, k);
            for j in k + 1..n {
                let nj = tail_norm(&work, k, j);
                if nj > best_norm {
                    best = j;
                    best_norm = nj;
                }
            }
            work.swap_cols(k, best);
            perm.swap(k, best);

            if best_norm == T::zero() {
                reflectors.push(Vec::new());
                betas.push(T::zero());
                continue;
            }

            let x0 = work[(k, k)];
            let alpha = if x0 >= T::zero() {
                -best_norm
            } else {
                best_norm
            };
            let mut v: Vec<T> = (k..m).map(|i| work[(i, k)]).collect();
            v[0] = v[0] - alpha;
            let vtv = dot(&v, &v);
            let beta = if vtv == T::zero() {
                T::zero()
            } else {
                cast::<T>(2.0) / vtv
            };

            if beta != T::zero() {
                for j in k + 1..n {
                    let col: Vec<T> = (k..m).map(|i| work[(i, j)]).collect();
                    let w = beta * dot(&v, &col);
                    for (off, &vi) in v.iter().enumerate() {
                        work[(k + off, j)] = work[(k + off, j)] - w * vi;
                    }
                }
            }
            work[(k, k)] = alpha;
            for i in k + 1..m {
                work[(i, k)] = T::zero();
            }
            reflectors.push(v);
            betas.push(beta);
        }

        ColPivQr {
            r: work,
            reflectors,
            betas,
            perm,
            rows: m,
            cols: n,
        }
    }

    /// Magnitudes of the R diagonal, in pivot order (non-increasing up to
    /// roundoff).
    pub fn r_diag(&self) -> Vec<T> {
        (0..self.cols.min(self.rows))
            .map(|k| self.r[(k, k)].abs())
            .collect()
    }

    /// Number of diagonal entries above `rank_tol` relative to the largest.
    pub fn rank(&self, rank_tol: T) -> usize {
        let diag = self.r_diag();
        let scale = diag.first().copied().unwrap_or(T::zero());
        if scale == T::zero() {
            return 0;
        }
        diag.iter().take_while(|&&d| d > rank_tol * scale).count()
    }

    /// Columns of the original matrix in greedy pivot order.
    pub fn pivot_order(&self) -> &[usize] {
        &self.perm
    }

    /// Product of the R diagonal magnitudes: the covolume of the column
    /// parallelepiped, |det| in the square case.
    pub fn abs_det(&self) -> T {
        self.r_diag()
            .into_iter()
            .fold(T::one(), |acc, d| acc * d)
    }

    fn apply_qt(&self, rhs: &mut [T]) {
        for (k, v) in self.reflectors.iter().enumerate() {
            let beta = self.betas[k];
            if beta == T::zero() || v.is_empty() {
                continue;
            }
            let w = beta * dot(v, &rhs[k..]);
            for (off, &vi) in v.iter().enumerate() {
                rhs[k + off] = rhs[k + off] - w * vi;
            }
        }
    }

    /// Least-squares solution of `A·x ≈ b` in the original column order.
    /// Fails on a numerically singular R diagonal.
    pub fn solve_least_squares(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "ColPivQr::solve_least_squares",
                expected: self.rows,
                got: b.len(),
            });
        }
        let n = self.cols;
        if n > self.rows {
            return Err(Error::RankDeficient {
                ambient_dim: self.rows,
                rank: self.rows.min(n),
            });
        }
        let mut c = b.to_vec();
        self.apply_qt(&mut c);

        let mut y = vec![T::zero(); n];
        for k in (0..n).rev() {
            let mut s = c[k];
            for j in k + 1..n {
                s = s - self.r[(k, j)] * y[j];
            }
            let d = self.r[(k, k)];
            if d == T::zero() {
                return Err(Error::RankDeficient {
                    ambient_dim: self.rows,
                    rank: k,
                });
            }
            y[k] = s / d;
        }

        let mut x = vec![T::zero(); n];
        for k in 0..n {
            x[self.perm[k]] = y[k];
        }
        Ok(x)
    }
}

fn tail_norm<T: Scalar>(m: &Matrix<T>, from_row: usize, j: usize) -> T {
    let col = m.col(j);
    col[from_row..]
        .iter()
        .map(|&x| x * x)
        .sum::<T>()
        .sqrt()
}

/// Singular values by one-sided Jacobi rotations, sorted descending.
///
/// Works directly on the columns (no Gram matrix), so small singular values
/// are resolved down to machine precision rather than its square root.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    let mut u = a.clone();
    let (m, n) = (u.rows(), u.cols());
    let tol = T::epsilon() * cast::<T>(8.0);

    for _sweep in 0..40 {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(u.col(p), u.col(p));
                let beta = dot(u.col(q), u.col(q));
                let gamma = dot(u.col(p), u.col(q));
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = {
                    let s = if zeta >= T::zero() {
                        T::one()
                    } else {
                        -T::one()
                    };
                    s / (zeta.abs() + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<T> = (0..n)
        .map(|j| dot(u.col(j), u.col(j)).sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(cols: &[Vec<f64>]) -> Matrix<f64> {
        Matrix::from_columns(cols).unwrap()
    }

    #[test]
    fn solve_identity() {
        let qr = ColPivQr::factor(&Matrix::<f64>::identity(2));
        let x = qr.solve_least_squares(&[3.0, -2.0]).unwrap();
        assert_eq!(x, vec![3.0, -2.0]);
    }

    #[test]
    fn solve_diagonal_scaling() {
        let qr = ColPivQr::factor(&mat(&[vec![2.0, 0.0], vec![0.0, 2.0]]));
        let x = qr.solve_least_squares(&[1.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14);
        assert!((x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn least_squares_residual_is_orthogonal_part() {
        // single column (1,0) in 2-D, target (2,5): coefficient 2, residual 5
        let a = mat(&[vec![1.0, 0.0]]);
        let qr = ColPivQr::factor(&a);
        let x = qr.solve_least_squares(&[2.0, 5.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        let fit = a.matvec(&x);
        let res = ((2.0 - fit[0]).powi(2) + (5.0 - fit[1]).powi(2)).sqrt();
        assert!((res - 5.0).abs() < 1e-14);
    }

    #[test]
    fn abs_det_matches_2x2() {
        let qr = ColPivQr::factor(&mat(&[vec![2.0, 0.0], vec![1.0, 1.0]]));
        assert!((qr.abs_det() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_detects_deficiency() {
        let qr = ColPivQr::factor(&mat(&[vec![1.0, 2.0], vec![2.0, 4.0]]));
        assert_eq!(qr.rank(1e-10), 1);
        let full = ColPivQr::factor(&mat(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        assert_eq!(full.rank(1e-10), 2);
    }

    #[test]
    fn pivot_order_prefers_long_columns() {
        let qr = ColPivQr::factor(&mat(&[
            vec![0.1, 0.0],
            vec![9.0, 1.0],
            vec![0.0, 2.0],
        ]));
        assert_eq!(qr.pivot_order()[0], 1);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let sv = singular_values(&mat(&[vec![3.0, 0.0], vec![0.0, -2.0]]));
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_values_detect_near_dependence() {
        let sv = singular_values(&mat(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-9]]));
        assert!(sv[1] / sv[0] < 1e-8);
        assert!(sv[1] > 0.0);
    }

    #[test]
    fn qr_reconstructs_solution_of_random_system() {
        // fixed arbitrary 4x3 system, compare A·x to projection of b
        let a = mat(&[
            vec![1.0, 2.0, -1.0, 0.5],
            vec![0.0, 1.0, 4.0, -2.0],
            vec![3.0, -1.0, 0.0, 1.0],
        ]);
        let x_true = [0.75, -1.5, 2.0];
        let b = a.matvec(&x_true);
        let x = ColPivQr::factor(&a).solve_least_squares(&b).unwrap();
        for (xi, ti) in x.iter().zip(x_true.iter()) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }
}
