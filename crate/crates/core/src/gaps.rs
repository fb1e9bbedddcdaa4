//! Instance families on which the masked bound beats the plain bound by
//! an amount linear in `n`.
//!
//! * Unscaled: `k` diagonal blocks `(√2/2) J₂`, mask `I`, `γ = 1`. The gap is
//!   at least `¼ ln(4/3) n`.
//! * Scaled: `k` blocks `[[1, c₁], [c₁, 1]]` followed by `k` blocks
//!   `[[1, c₂], [c₂, 1]]`, `n = 4k`. Both sides use their best `γ`; the
//!   masked side is `I` with bound 0, and the gap is at least `b n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::diagonal::{optimal_gamma_diagonal, solve_diagonal_linx, solve_diagonal_linx_scaled};
use crate::error::{LinxError, Result};
use crate::instance::{validate, Mask, SymMatrix};
use crate::linx::{solve_linx, SolverOptions};
use crate::num::serialize_f64;
use crate::scaling::optimize_gamma;

pub const DEFAULT_GAP_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GapKind {
    Unscaled,
    Scaled,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReportRow {
    pub n: usize,
    pub plain_bound: f64,
    pub masked_bound: f64,
    pub gap: f64,
    pub theoretical_floor: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub gamma_plain: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub gamma_masked: f64,
    /// False when an inner solve stopped at its iteration limit.
    pub converged: bool,
}

/// `¼ ln(4/3)`, the per-coordinate gap of the unscaled family.
pub fn unscaled_gap_constant() -> f64 {
    0.25 * (4.0f64 / 3.0).ln()
}

fn pair_block(c: f64) -> SymMatrix {
    SymMatrix::from_rows(&[vec![1.0, c], vec![c, 1.0]]).expect("2x2 block is symmetric")
}

/// Block-diagonal with `n/2` copies of `(√2/2) J₂`.
pub fn build_maskgap_instance(n: usize) -> Result<SymMatrix> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(LinxError::InvalidArgument(format!(
            "gap instance needs even n >= 2, got {n}"
        )));
    }
    let block = SymMatrix::ones(2).scaled(std::f64::consts::FRAC_1_SQRT_2);
    Ok(SymMatrix::block_diagonal(&vec![block; n / 2]))
}

fn check_pair(c1: f64, c2: f64) -> Result<()> {
    for c in [c1, c2] {
        if !(c.is_finite() && c * c <= 1.0) {
            return Err(LinxError::InvalidArgument(format!(
                "block coefficient {c} must satisfy c^2 <= 1"
            )));
        }
    }
    if c1 * c1 == c2 * c2 {
        return Err(LinxError::InvalidArgument(format!(
            "block coefficients need c1^2 != c2^2, got {c1} and {c2}"
        )));
    }
    Ok(())
}

/// `n/4` blocks `[[1, c₁], [c₁, 1]]` then `n/4` blocks `[[1, c₂], [c₂, 1]]`.
pub fn build_scaledgap_instance(n: usize, c1: f64, c2: f64) -> Result<SymMatrix> {
    if n < 4 || !n.is_multiple_of(4) {
        return Err(LinxError::InvalidArgument(format!(
            "scaled gap instance needs n divisible by 4, got {n}"
        )));
    }
    check_pair(c1, c2)?;
    let k = n / 4;
    let mut blocks = vec![pair_block(c1); k];
    blocks.extend(vec![pair_block(c2); k]);
    Ok(SymMatrix::block_diagonal(&blocks))
}

/// `h(γ)` and `h'(γ)` where `h` sums, over both block types, the scaled
/// eigenvalue lower bound at `s/n = ½` (times two).
fn floor_terms(c1: f64, c2: f64, gamma: f64) -> (f64, f64) {
    let mut h = 0.0;
    let mut dh = 0.0;
    for c in [c1, c2] {
        for lam in [1.0 + c, 1.0 - c] {
            let l2 = lam * lam;
            h += ((gamma * l2 + 1.0) / 2.0).ln();
            dh += l2 / (gamma * l2 + 1.0);
        }
        h -= gamma.ln();
        dh -= 1.0 / gamma;
    }
    (h, dh)
}

/// `(γ̂, b)` with `b = min_γ h(γ) / 8`, the per-coordinate floor for the
/// scaled family. For `(c₁, c₂) = (0, 1)` this is
/// `min_γ [ln((γ+1)²/(4γ)) + ln(1 + 1/(4γ))] / 8`.
pub fn scaled_gap_floor(c1: f64, c2: f64) -> Result<(f64, f64)> {
    check_pair(c1, c2)?;
    // h is convex in ψ = ln γ; bisect on the sign of h'
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while floor_terms(c1, c2, lo.exp()).1 > 0.0 {
        lo *= 2.0;
        if lo < -700.0 {
            return Err(LinxError::BracketFailure { limit: 700.0 });
        }
    }
    while floor_terms(c1, c2, hi.exp()).1 < 0.0 {
        hi *= 2.0;
        if hi > 700.0 {
            return Err(LinxError::BracketFailure { limit: 700.0 });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if floor_terms(c1, c2, mid.exp()).1 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = (0.5 * (lo + hi)).exp();
    Ok((gamma, floor_terms(c1, c2, gamma).0 / 8.0))
}

fn unscaled_row(n: usize, opts: &SolverOptions) -> Result<GapReportRow> {
    let c = build_maskgap_instance(n)?;
    let s = n / 2;
    let d = c.diagonal();
    let inst = validate(c, s)?;
    let plain = solve_linx(&inst, s, &Mask::all_ones(n), 1.0, opts)?;
    let masked = solve_diagonal_linx(&d, s)?;
    Ok(GapReportRow {
        n,
        plain_bound: plain.value,
        masked_bound: masked.value,
        gap: plain.value - masked.value,
        theoretical_floor: unscaled_gap_constant() * n as f64,
        gamma_plain: 1.0,
        gamma_masked: 1.0,
        converged: plain.converged,
    })
}

fn scaled_row(n: usize, c1: f64, c2: f64, b: f64, opts: &SolverOptions) -> Result<GapReportRow> {
    let c = build_scaledgap_instance(n, c1, c2)?;
    let s = n / 2;
    let d = c.diagonal();
    let inst = validate(c, s)?;
    let plain = optimize_gamma(&inst, s, &Mask::all_ones(n), opts)?;
    // C∘I is diagonal, where 1/d_s² is the optimal scaling
    let gamma_masked = optimal_gamma_diagonal(&d, s)?;
    let masked = solve_diagonal_linx_scaled(&d, s, gamma_masked)?;
    Ok(GapReportRow {
        n,
        plain_bound: plain.bound_value,
        masked_bound: masked.value,
        gap: plain.bound_value - masked.value,
        theoretical_floor: b * n as f64,
        gamma_plain: plain.gamma_hat,
        gamma_masked,
        converged: plain.converged,
    })
}

/// One row per `n`, computed in parallel and returned sorted by `n`.
/// `(c₁, c₂)` only matters for [`GapKind::Scaled`].
pub fn run_gap_experiment(
    kind: GapKind,
    n_list: &[usize],
    c1: f64,
    c2: f64,
    opts: &SolverOptions,
) -> Result<Vec<GapReportRow>> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    if let Some(&n) = ns.iter().find(|&&n| n > DEFAULT_GAP_CAP) {
        return Err(LinxError::TooLarge {
            n,
            cap: DEFAULT_GAP_CAP,
        });
    }
    match kind {
        GapKind::Unscaled => ns.par_iter().map(|&n| unscaled_row(n, opts)).collect(),
        GapKind::Scaled => {
            let (_, b) = scaled_gap_floor(c1, c2)?;
            ns.par_iter()
                .map(|&n| scaled_row(n, c1, c2, b, opts))
                .collect()
        }
    }
}
