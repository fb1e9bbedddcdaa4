//! Brute-force ground truth: `z(C, s) = max { ldet C[S,S] : |S| = s }`.
//!
//! Deliberately naive. Subsets are enumerated in lexicographic order and a
//! later subset replaces the incumbent only when strictly better, so ties
//! resolve to the lexicographically smallest subset. Indices are 0-based.

use nalgebra::{Cholesky, DMatrix};
use serde::Serialize;

use crate::error::{LinxError, Result};
use crate::instance::{Instance, SymMatrix};

pub const DEFAULT_EXACT_CAP: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct ExactResult {
    /// Natural-log entropy; `-inf` when every subset is singular.
    pub value: f64,
    pub best_subset: Vec<usize>,
}

/// `ldet C[S,S]`, or `-inf` when the principal submatrix is not positive definite.
pub fn logdet_submatrix(c: &SymMatrix, subset: &[usize]) -> f64 {
    assert!(!subset.is_empty(), "subset must be nonempty");
    let k = subset.len();
    let sub = DMatrix::from_fn(k, k, |i, j| c.get(subset[i], subset[j]));
    match Cholesky::new(sub) {
        Some(chol) => {
            2.0 * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>()
        }
        None => f64::NEG_INFINITY,
    }
}

/// Lexicographic successor of a k-combination of `0..n`; false when exhausted.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in (i + 1)..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub fn exact_mesp(inst: &Instance, s: usize) -> Result<ExactResult> {
    exact_mesp_with_cap(inst, s, DEFAULT_EXACT_CAP)
}

pub fn exact_mesp_with_cap(inst: &Instance, s: usize, cap: usize) -> Result<ExactResult> {
    let n = inst.n();
    if n > cap {
        return Err(LinxError::TooLarge { n, cap });
    }
    if s == 0 || s > n {
        return Err(LinxError::InvalidCardinality { s, n });
    }
    let c = inst.matrix();
    let mut comb: Vec<usize> = (0..s).collect();
    let mut best = ExactResult {
        value: logdet_submatrix(c, &comb),
        best_subset: comb.clone(),
    };
    while next_combination(&mut comb, n) {
        let v = logdet_submatrix(c, &comb);
        if v > best.value {
            best.value = v;
            best.best_subset.copy_from_slice(&comb);
        }
    }
    Ok(best)
}
