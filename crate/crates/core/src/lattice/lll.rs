//! Basis reduction. LLL brings a basis near-orthogonal in polynomial time;
//! a pairwise Lagrange sweep then finishes the job when the lattice truly
//! has an orthogonal basis, as transform-coder lattices do.

use super::{LatticeBasis, Tolerances};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::scalar::{cast, Scalar};

/// Lovász parameter used when we want the strongest practical reduction.
pub const DECOMPOSE_DELTA: f64 = 0.99;

/// Lenstra–Lenstra–Lovász reduction with parameter `delta` in (1/4, 1).
///
/// The output spans the same lattice; swaps and size reductions are the only
/// moves. Gram–Schmidt data is recomputed from scratch after each swap,
/// favouring numerical robustness over asymptotic constants at the sizes
/// this library targets.
pub fn lll_reduce<T: Scalar>(basis: &LatticeBasis<T>, delta: T) -> Result<LatticeBasis<T>> {
    let quarter = cast::<T>(0.25);
    if !(delta > quarter && delta < T::one()) {
        return Err(Error::InvalidConfig(format!(
            "LLL delta must lie in (0.25, 1), got {delta}"
        )));
    }
    let n = basis.rank();
    if n <= 1 {
        return Ok(basis.clone());
    }
    let mut b = basis.columns().clone();
    let half = cast::<T>(0.5);

    // mu[j][i] for i < j, and squared GS norms.
    let (mut mu, mut gs_sq) = gram_schmidt(&b);

    // Each swap strictly decreases a positive potential bounded below, so
    // this terminates; the cap only guards against float pathologies.
    let cap = 1000 * n * n;
    let mut steps = 0usize;
    let mut k = 1usize;
    while k < n {
        size_reduce_column(&mut b, &mut mu, k, half);
        let lhs = gs_sq[k];
        let rhs = (delta - mu[k][k - 1] * mu[k][k - 1]) * gs_sq[k - 1];
        if lhs < rhs {
            b.swap_cols(k, k - 1);
            let fresh = gram_schmidt(&b);
            mu = fresh.0;
            gs_sq = fresh.1;
            k = k.max(2) - 1;
            steps += 1;
            if steps > cap {
                return Err(Error::NonConvergence {
                    swaps: steps,
                    cap,
                    max_fractional: f64::NAN,
                    covolume: basis.determinant().to_f64().unwrap_or(f64::NAN),
                });
            }
        } else {
            k += 1;
        }
    }
    Ok(LatticeBasis::from_columns_unchecked(b))
}

/// One full pass of Lagrange (pairwise) reduction over all column pairs.
/// Returns the number of column updates performed.
pub(crate) fn lagrange_sweep<T: Scalar>(b: &mut Matrix<T>) -> usize {
    let n = b.cols();
    let mut changes = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let bi_sq = dot(b.col(i), b.col(i));
            if bi_sq == T::zero() {
                continue;
            }
            let q = (dot(b.col(j), b.col(i)) / bi_sq).round_half_even();
            if q != T::zero() {
                b.col_sub_scaled(j, i, q);
                changes += 1;
            }
        }
    }
    changes
}

/// Largest Gram off-diagonal relative to the product of the column norms.
pub(crate) fn max_relative_off_diagonal<T: Scalar>(b: &Matrix<T>) -> T {
    let norms: Vec<T> = b.columns().map(norm).collect();
    let mut worst = T::zero();
    for i in 0..b.cols() {
        for j in (i + 1)..b.cols() {
            let denom = norms[i] * norms[j];
            if denom > T::zero() {
                worst = worst.max(dot(b.col(i), b.col(j)).abs() / denom);
            }
        }
    }
    worst
}

fn size_reduce_column<T: Scalar>(b: &mut Matrix<T>, mu: &mut [Vec<T>], k: usize, half: T) {
    for i in (0..k).rev() {
        if mu[k][i].abs() > half {
            let q = mu[k][i].round_half_even();
            b.col_sub_scaled(k, i, q);
            for l in 0..i {
                let adj = q * mu[i][l];
                mu[k][l] -= adj;
            }
            // mu[i][i] = 1, so the i-th coefficient just drops by q.
            mu[k][i] -= q;
        }
    }
}

fn gram_schmidt<T: Scalar>(b: &Matrix<T>) -> (Vec<Vec<T>>, Vec<T>) {
    let n = b.cols();
    let m = b.rows();
    let mut star: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut mu: Vec<Vec<T>> = vec![vec![T::zero(); n]; n];
    let mut gs_sq = vec![T::zero(); n];
    for j in 0..n {
        let mut v = b.col(j).to_vec();
        for i in 0..j {
            let m_ji = if gs_sq[i] > T::zero() {
                dot(b.col(j), &star[i]) / gs_sq[i]
            } else {
                T::zero()
            };
            mu[j][i] = m_ji;
            for t in 0..m {
                v[t] -= m_ji * star[i][t];
            }
        }
        gs_sq[j] = dot(&v, &v);
        mu[j][j] = T::one();
        star.push(v);
    }
    (mu, gs_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cast;

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    fn basis(cols: &[Vec<f64>]) -> LatticeBasis<f64> {
        LatticeBasis::new(Matrix::from_columns(cols).unwrap(), &tol()).unwrap()
    }

    #[test]
    fn delta_range_enforced() {
        let b = basis(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(lll_reduce(&b, 0.25).is_err());
        assert!(lll_reduce(&b, 1.0).is_err());
        assert!(lll_reduce(&b, 0.75).is_ok());
    }

    #[test]
    fn reduces_skewed_grid_to_unit_cells() {
        // Columns (1,0) and (k,1) generate Z²; LLL should fall back to
        // near-unit vectors.
        let b = basis(&[vec![1.0, 0.0], vec![57.0, 1.0]]);
        let r = lll_reduce(&b, cast(DECOMPOSE_DELTA)).unwrap();
        assert!(r.same_lattice(&b, &tol()).unwrap());
        for c in r.columns().columns() {
            assert!(norm(c) < 1.5, "column too long: {c:?}");
        }
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hexagonal_lattice_shortest_vectors() {
        // Basis (2,0), (1,√3): shortest vectors have norm 2. Oracle by
        // brute-force enumeration of small integer combinations.
        let s3 = 3.0f64.sqrt();
        let b = basis(&[vec![2.0, 0.0], vec![1.0, s3]]);
        let mut shortest = f64::INFINITY;
        for p in -4i32..=4 {
            for q in -4i32..=4 {
                if p == 0 && q == 0 {
                    continue;
                }
                let x = 2.0 * p as f64 + q as f64;
                let y = s3 * q as f64;
                shortest = shortest.min((x * x + y * y).sqrt());
            }
        }
        assert!((shortest - 2.0).abs() < 1e-12);
        let r = lll_reduce(&b, cast(DECOMPOSE_DELTA)).unwrap();
        let norms: Vec<f64> = r.columns().columns().map(norm).collect();
        assert!((norms[0] - shortest).abs() < 1e-9, "norms {norms:?}");
        assert!(r.same_lattice(&b, &tol()).unwrap());
    }

    #[test]
    fn preserves_lattice_on_random_unimodular_mix() {
        // Scaled axes mixed by an integer unimodular matrix; reduction must
        // recover the same lattice with near-orthogonal columns.
        let b = basis(&[vec![3.0, 3.0, 1.0], vec![2.0, 2.0, 1.0], vec![7.0, 8.0, 3.0]]);
        let r = lll_reduce(&b, cast(DECOMPOSE_DELTA)).unwrap();
        assert!(r.same_lattice(&b, &tol()).unwrap());
        assert!((r.determinant() - b.determinant()).abs() < 1e-9);
    }

    #[test]
    fn lagrange_sweep_fixes_residual_skew() {
        let mut m = Matrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let changed = lagrange_sweep(&mut m);
        assert!(changed > 0);
        assert!(max_relative_off_diagonal(&m) < 1e-12);
    }

    #[test]
    fn off_diagonal_measure() {
        let m = Matrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(max_relative_off_diagonal(&m), 0.0);
        let skew = Matrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let expect = 1.0 / 2.0f64.sqrt();
        assert!((max_relative_off_diagonal(&skew) - expect).abs() < 1e-12);
    }
}
