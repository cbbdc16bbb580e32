//! The identification pipeline: from decoded blocks back to the coder.
//!
//! Three stages. First the smallest lattice containing the observations is
//! accumulated by repeated merging. Then the basis is driven towards
//! orthogonal columns, which for a transform-coder lattice recovers the
//! scaled transform rows exactly. Finally the column norms split into
//! quantizer steps and unit rows, and the rows can be compared against a
//! dictionary of known transforms.

mod dictionary;
mod report;

pub use dictionary::{
    match_dictionary, standard_dictionary, DictionaryEntry, DictionaryMatch, SignedPermutation,
};
pub use report::{Diagnostics, MatchReport, Report};

use crate::codec::ObservationSet;
use crate::error::{Error, Result};
use crate::lattice::{lattice_from_generators, lll_reduce, LatticeBasis, Tolerances};
use crate::lattice::{lagrange_sweep, max_relative_off_diagonal};
use crate::matrix::Matrix;
use crate::scalar::{cast, Scalar};

/// LLL parameter for the decomposition stage. Close to 1 trades a few extra
/// swaps for the strongest reduction the algorithm offers.
pub const DECOMPOSE_DELTA: f64 = 0.99;

/// A dictionary hit worse than this per-entry error is reported as unknown.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 1e-3;

/// Everything the pipeline can say about one observation set.
#[derive(Debug, Clone)]
pub struct IdentificationResult<T> {
    /// Basis of the recovered lattice, orthogonalized as far as possible.
    pub lattice: LatticeBasis<T>,
    /// Quantizer steps, descending; present only if the basis decomposed
    /// into orthogonal columns.
    pub steps: Option<Vec<T>>,
    /// Estimated transform, one unit row per step, aligned with `steps`.
    pub transform: Option<Matrix<T>>,
    /// Whether the orthogonal decomposition succeeded to tolerance.
    pub decomposition_ok: bool,
    /// Observations that actually refined the lattice (the full-rank seed
    /// plus every merge that swapped).
    pub used_observations: usize,
    /// Total merge swaps; grows linearly with dimension for coder output.
    pub swap_count: usize,
    /// Worst integrality deviation of any observation in the final basis.
    pub max_membership_residual: T,
}

/// Runs lattice accumulation only. Returns the merged basis, the number of
/// observations that contributed, and the total swap count.
pub fn identify_lattice<T: Scalar>(
    observations: &ObservationSet<T>,
    tol: &Tolerances<T>,
) -> Result<(LatticeBasis<T>, usize, usize)> {
    lattice_from_generators(observations.vectors(), tol)
}

/// Reduces a basis towards orthogonal columns: LLL first, then pairwise
/// Lagrange passes until they stop changing anything. The flag reports
/// whether the largest relative Gram off-diagonal ended below `orth_tol`;
/// when false the returned basis is still reduced and spans the same
/// lattice, it just does not split into transform rows.
pub fn orthogonal_decompose<T: Scalar>(
    basis: &LatticeBasis<T>,
    tol: &Tolerances<T>,
) -> Result<(LatticeBasis<T>, bool)> {
    let reduced = lll_reduce(basis, cast(DECOMPOSE_DELTA))?;
    let mut cols = reduced.columns().clone();
    // Lagrange passes strictly shorten columns; the cap is only a guard.
    for _ in 0..64 {
        if lagrange_sweep(&mut cols) == 0 {
            break;
        }
    }
    let ok = max_relative_off_diagonal(&cols) <= tol.orth_tol;
    Ok((LatticeBasis::new(cols, tol)?, ok))
}

/// Splits an orthogonal basis into quantizer steps (column norms) and unit
/// transform rows. Steps come out descending, ties keeping basis order; each
/// row is signed so its largest-magnitude entry is positive.
pub fn extract_steps_and_transform<T: Scalar>(basis: &LatticeBasis<T>) -> (Vec<T>, Matrix<T>) {
    let n = basis.rank();
    let mut order: Vec<usize> = (0..n).collect();
    let norms = basis.column_norms();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let mut steps = Vec::with_capacity(n);
    let mut t = Matrix::zeros(n, basis.ambient_dim());
    for (row, &j) in order.iter().enumerate() {
        let col = basis.columns().col(j);
        let len = norms[j];
        steps.push(len);
        let mut unit: Vec<T> = col.iter().map(|&x| x / len).collect();
        let mut lead = 0usize;
        for (i, x) in unit.iter().enumerate() {
            if x.abs() > unit[lead].abs() {
                lead = i;
            }
        }
        if unit[lead] < T::zero() {
            for x in unit.iter_mut() {
                *x = -*x;
            }
        }
        for (i, &x) in unit.iter().enumerate() {
            t[(row, i)] = x;
        }
    }
    (steps, t)
}

/// Full pipeline over one observation set.
pub fn identify<T: Scalar>(
    observations: &ObservationSet<T>,
    tol: &Tolerances<T>,
) -> Result<IdentificationResult<T>> {
    let (raw, used, swaps) = identify_lattice(observations, tol)?;
    let (basis, ok) = orthogonal_decompose(&raw, tol)?;
    let residual = basis.max_membership_deviation(observations.vectors())?;
    let (steps, transform) = if ok {
        let (s, t) = extract_steps_and_transform(&basis);
        (Some(s), Some(t))
    } else {
        (None, None)
    };
    Ok(IdentificationResult {
        lattice: basis,
        steps,
        transform,
        decomposition_ok: ok,
        used_observations: used,
        swap_count: swaps,
        max_membership_residual: residual,
    })
}

/// Convenience check used by tests and experiments: do two transforms agree
/// up to reordering and sign of their rows?
pub fn rows_match_signed_permutation<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, tol: T) -> bool {
    match dictionary::align_rows(a, b) {
        Some((err, _)) => err <= tol,
        None => false,
    }
}
