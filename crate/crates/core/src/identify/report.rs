//! JSON-serializable summary of an identification run.

use serde::{Deserialize, Serialize};

use super::{DictionaryMatch, IdentificationResult, SignedPermutation};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub dim: usize,
    pub num_observations: usize,
    pub used_observations: usize,
    pub determinant: f64,
    /// Descending quantizer steps, or null if the basis did not decompose.
    pub steps: Option<Vec<f64>>,
    /// Estimated transform in row-major order, or null likewise.
    pub transform: Option<Vec<Vec<f64>>>,
    pub orthogonal_decomposition_ok: bool,
    pub dictionary_match: Option<MatchReport>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchReport {
    pub transform: String,
    pub max_abs_error: f64,
    /// Estimate row i corresponds to `signs[i]` times reference row
    /// `perm[i]`.
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
    pub confident: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub swap_count: usize,
    pub max_membership_residual: f64,
}

impl Report {
    pub fn new<T: Scalar>(
        result: &IdentificationResult<T>,
        num_observations: usize,
        dictionary_match: Option<(&DictionaryMatch<T>, bool)>,
    ) -> Report {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        Report {
            dim: result.lattice.ambient_dim(),
            num_observations,
            used_observations: result.used_observations,
            determinant: f(result.lattice.determinant()),
            steps: result.steps.as_ref().map(|s| s.iter().map(|&x| f(x)).collect()),
            transform: result.transform.as_ref().map(|t| {
                (0..t.rows())
                    .map(|i| (0..t.cols()).map(|j| f(t[(i, j)])).collect())
                    .collect()
            }),
            orthogonal_decomposition_ok: result.decomposition_ok,
            dictionary_match: dictionary_match.map(|(m, confident)| {
                let SignedPermutation { perm, signs } = m.alignment.clone();
                MatchReport {
                    transform: m.kind.label(),
                    max_abs_error: f(m.max_abs_error),
                    perm,
                    signs,
                    confident,
                }
            }),
            diagnostics: Diagnostics {
                swap_count: result.swap_count,
                max_membership_residual: f(result.max_membership_residual),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
