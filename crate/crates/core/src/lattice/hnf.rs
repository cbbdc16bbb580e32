//! Exact lattice arithmetic over the rationals.
//!
//! Used as an independent check on the floating-point pipeline: a rational
//! generating set has a unique column-style Hermite normal form, so two
//! generating sets span the same lattice iff their HNFs are identical.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Dense rational matrix, column major like [`crate::matrix::Matrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn from_columns(cols: &[Vec<BigRational>]) -> Result<Self> {
        let Some(first) = cols.first() else {
            return Err(Error::InvalidConfig("rational matrix needs at least one column".into()));
        };
        let rows = first.len();
        if rows == 0 {
            return Err(Error::InvalidConfig("rational matrix needs at least one row".into()));
        }
        let mut data = Vec::with_capacity(rows * cols.len());
        for c in cols {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    context: "RationalMatrix::from_columns",
                    expected: rows,
                    got: c.len(),
                });
            }
            data.extend(c.iter().cloned());
        }
        Ok(RationalMatrix {
            rows,
            cols: cols.len(),
            data,
        })
    }

    /// Integer entries given as (numerator, denominator) pairs per column.
    pub fn from_ratios(cols: &[Vec<(i64, i64)>]) -> Result<Self> {
        let converted: Vec<Vec<BigRational>> = cols
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
                    .collect()
            })
            .collect();
        RationalMatrix::from_columns(&converted)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &BigRational {
        &self.data[j * self.rows + i]
    }

    pub fn column(&self, j: usize) -> &[BigRational] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Exact determinant of the lattice spanned by the columns: product of
    /// the HNF pivots. Errors if the columns do not span full rank.
    pub fn lattice_determinant(&self) -> Result<BigRational> {
        let h = hnf_exact(self)?;
        let mut det = BigRational::one();
        for i in 0..h.rows {
            det *= h.at(i, i).clone();
        }
        Ok(det.abs())
    }

    /// Exact membership test against a full-rank lower-triangular HNF basis.
    pub fn hnf_contains(&self, v: &[BigRational]) -> Result<bool> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "hnf_contains",
                expected: self.rows,
                got: v.len(),
            });
        }
        if self.cols != self.rows {
            return Err(Error::RankDeficient {
                ambient_dim: self.rows,
                rank: self.cols,
            });
        }
        // Forward substitution; every coefficient must be an integer.
        let mut rem: Vec<BigRational> = v.to_vec();
        for j in 0..self.cols {
            let pivot = self.at(j, j);
            if pivot.is_zero() {
                return Err(Error::RankDeficient {
                    ambient_dim: self.rows,
                    rank: j,
                });
            }
            let c = &rem[j] / pivot;
            if !c.is_integer() {
                return Ok(false);
            }
            for i in j..self.rows {
                let adj = &c * self.at(i, j);
                rem[i] -= adj;
            }
        }
        Ok(rem.iter().all(Zero::is_zero))
    }
}

/// Column-style Hermite normal form of the lattice spanned by the columns.
///
/// Output is square, lower triangular, with positive pivots and every entry
/// below a pivot reduced into [0, pivot). This is the canonical basis of the
/// lattice: equal lattices produce identical HNFs. Errors if the generators
/// do not span the full space.
pub fn hnf_exact(gens: &RationalMatrix) -> Result<RationalMatrix> {
    let n = gens.rows;
    // Clear denominators: work over integers, scale back at the end.
    let mut lcm = BigInt::one();
    for x in &gens.data {
        lcm = lcm.lcm(x.denom());
    }
    let mut cols: Vec<Vec<BigInt>> = (0..gens.cols)
        .map(|j| {
            gens.column(j)
                .iter()
                .map(|x| (x * BigRational::from(lcm.clone())).to_integer())
                .collect()
        })
        .collect();

    // Row-by-row elimination across columns: a column Euclid pass leaves one
    // pivot column per row and zeros to its right.
    let mut h: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for row in 0..n {
        // Gather all columns with a nonzero entry in this row and reduce
        // them pairwise, exactly the Euclidean algorithm on the row entries.
        loop {
            let mut nonzero: Vec<usize> = (0..cols.len())
                .filter(|&j| !cols[j][row].is_zero())
                .collect();
            if nonzero.len() <= 1 {
                break;
            }
            // Reduce every other column by the one with smallest |entry|.
            nonzero.sort_by_key(|&j| cols[j][row].abs());
            let base = nonzero[0];
            for &j in &nonzero[1..] {
                let q = cols[j][row].div_floor(&cols[base][row]);
                for i in 0..n {
                    let adj = &q * &cols[base][i];
                    cols[j][i] -= adj;
                }
            }
        }
        let pivot_col = (0..cols.len()).find(|&j| !cols[j][row].is_zero());
        let Some(pc) = pivot_col else {
            return Err(Error::RankDeficient {
                ambient_dim: n,
                rank: row,
            });
        };
        let mut pivot = cols.remove(pc);
        if pivot[row].is_negative() {
            for x in pivot.iter_mut() {
                *x = -x.clone();
            }
        }
        h.push(pivot);
    }

    // Canonical reduction: entries left of each pivot into [0, pivot).
    // Ascending pivot order: reducing by h[j] only touches rows >= j, which
    // later stages then canonicalize in turn.
    for j in 1..n {
        for k in 0..j {
            let q = h[k][j].div_floor(&h[j][j]);
            if !q.is_zero() {
                for i in 0..n {
                    let adj = &q * &h[j][i];
                    h[k][i] -= adj;
                }
            }
        }
    }

    let scale = BigRational::new(BigInt::one(), lcm);
    let rational_cols: Vec<Vec<BigRational>> = h
        .into_iter()
        .map(|c| {
            c.into_iter()
                .map(|x| BigRational::from(x) * scale.clone())
                .collect()
        })
        .collect();
    RationalMatrix::from_columns(&rational_cols)
}
