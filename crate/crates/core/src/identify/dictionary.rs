//! Matching an estimated transform against a dictionary of known ones.
//!
//! An orthogonal decomposition fixes the transform only up to reordering and
//! sign of its rows, so comparison happens modulo signed permutation. Rows
//! are paired greedily by inner product magnitude; for genuine matches every
//! product is near +/-1 and the pairing is unambiguous.

use crate::codec::TransformKind;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// A named reference transform.
#[derive(Debug, Clone)]
pub struct DictionaryEntry<T> {
    pub kind: TransformKind,
    pub matrix: Matrix<T>,
}

/// Row correspondence between an estimate and a reference: estimate row `i`
/// is `signs[i]` times reference row `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedPermutation {
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
}

#[derive(Debug, Clone)]
pub struct DictionaryMatch<T> {
    pub kind: TransformKind,
    /// Largest entrywise deviation after aligning rows and signs.
    pub max_abs_error: T,
    pub alignment: SignedPermutation,
}

impl<T: Scalar> DictionaryMatch<T> {
    /// Whether the match is close enough to name the transform.
    pub fn is_confident(&self, threshold: T) -> bool {
        self.max_abs_error <= threshold
    }
}

/// Best signed-permutation alignment of `estimate` rows onto `reference`
/// rows, or `None` if shapes differ. Returns the max entrywise error and the
/// alignment that realizes it.
pub(crate) fn align_rows<T: Scalar>(
    estimate: &Matrix<T>,
    reference: &Matrix<T>,
) -> Option<(T, SignedPermutation)> {
    if estimate.rows() != reference.rows() || estimate.cols() != reference.cols() {
        return None;
    }
    let n = estimate.rows();
    let m = estimate.cols();
    let row = |mat: &Matrix<T>, i: usize| -> Vec<T> { (0..m).map(|j| mat[(i, j)]).collect() };

    // Greedy max-|inner product| assignment.
    let mut products = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        let ei = row(estimate, i);
        for j in 0..n {
            let rj = row(reference, j);
            products[i][j] = crate::matrix::dot(&ei, &rj);
        }
    }
    let mut perm = vec![usize::MAX; n];
    let mut signs = vec![0i8; n];
    let mut est_free = vec![true; n];
    let mut ref_free = vec![true; n];
    for _ in 0..n {
        let mut best = (T::neg_infinity(), 0, 0);
        for i in (0..n).filter(|&i| est_free[i]) {
            for j in (0..n).filter(|&j| ref_free[j]) {
                let p = products[i][j].abs();
                if p > best.0 {
                    best = (p, i, j);
                }
            }
        }
        let (_, i, j) = best;
        perm[i] = j;
        signs[i] = if products[i][j] >= T::zero() { 1 } else { -1 };
        est_free[i] = false;
        ref_free[j] = false;
    }

    let mut err = T::zero();
    for i in 0..n {
        let s = if signs[i] > 0 { T::one() } else { -T::one() };
        for c in 0..m {
            let d = (estimate[(i, c)] - s * reference[(perm[i], c)]).abs();
            err = err.max(d);
        }
    }
    Some((err, SignedPermutation { perm, signs }))
}

/// Finds the dictionary entry with the smallest aligned error. The
/// dictionary must be non-empty and every entry must match the estimate's
/// shape.
pub fn match_dictionary<T: Scalar>(
    estimate: &Matrix<T>,
    dictionary: &[DictionaryEntry<T>],
) -> Result<DictionaryMatch<T>> {
    if dictionary.is_empty() {
        return Err(Error::InvalidConfig("transform dictionary is empty".into()));
    }
    let mut best: Option<DictionaryMatch<T>> = None;
    for entry in dictionary {
        let Some((err, alignment)) = align_rows(estimate, &entry.matrix) else {
            return Err(Error::DimensionMismatch {
                context: "match_dictionary",
                expected: estimate.rows(),
                got: entry.matrix.rows(),
            });
        };
        if best.as_ref().map_or(true, |b| err < b.max_abs_error) {
            best = Some(DictionaryMatch {
                kind: entry.kind,
                max_abs_error: err,
                alignment,
            });
        }
    }
    Ok(best.expect("non-empty dictionary yields a best entry"))
}

/// The built-in dictionary for a given dimension: every structured
/// transform this crate can generate, plus any extra seeded rotations the
/// caller wants to test against.
pub fn standard_dictionary<T: Scalar>(dim: usize, extra_seeds: &[u64]) -> Result<Vec<DictionaryEntry<T>>> {
    let mut out = Vec::new();
    let mut kinds = vec![TransformKind::Dct2, TransformKind::Identity];
    if dim.is_power_of_two() {
        kinds.push(TransformKind::Hadamard);
    }
    kinds.extend(extra_seeds.iter().map(|&seed| TransformKind::RandomOrthonormal { seed }));
    for kind in kinds {
        out.push(DictionaryEntry {
            kind,
            matrix: crate::codec::build_transform(kind, dim)?,
        });
    }
    Ok(out)
}
