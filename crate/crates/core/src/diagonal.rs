//! Closed-form linx solutions for diagonal covariance matrices, the 2×2
//! optimal mask and scaling formulas, and the eigenvalue lower bound.
//!
//! For `C = Diag(d)` the objective separates:
//! `f(x) = ½ Σ ln((d_i² − 1) x_i + 1)`. Coordinates with `d_i > 1` (set G)
//! want to be 1, those with `d_i < 1` (set L) want to be 0 and `d_i = 1`
//! (set E) are indifferent. The optimum fills G first, then E, then L; a
//! block that is only partially filled is solved through a single pivot
//! coordinate `x_s` and the piecewise-linear equation `Σ x_i(x_s) = s`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{LinxError, Result};
use crate::instance::{validate, Instance, Mask, SymMatrix};
use crate::linx::{solve_linx, FeasiblePoint, SolverOptions};

/// `|d_i − 1|` at or below this puts `i` into E.
pub const TOL_UNIT: f64 = 1e-12;
/// Equality tolerance for the first-order conditions.
pub const TOL_FIRST_ORDER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    /// No split needed (all `d_i > 1` or all `< 1`); gap condition gave a 0/1 solution.
    BinaryCase,
    /// No split needed; interior pivot `0 < x̂_s < 1`.
    InteriorCase,
    /// `s ≤ |G|`: solve on G, zeros elsewhere.
    SplitG,
    /// `|G| < s ≤ |G ∪ E|`: ones on G, `s − |G|` spread uniformly over E.
    SplitE,
    /// `s > |G ∪ E|`: ones on G ∪ E, solve the remainder on L.
    SplitL,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagonalSolution {
    /// In the caller's index order.
    pub x_hat: FeasiblePoint,
    pub value: f64,
    /// `x̂_s` of the sub-problem when it has an interior pivot.
    pub pivot_value: Option<f64>,
    pub case_tag: CaseTag,
}

fn inv_shift(d: f64) -> f64 {
    1.0 / (d * d - 1.0)
}

fn all_same_side(d: &[f64]) -> bool {
    d.iter().all(|&v| v > 1.0) || d.iter().all(|&v| v > 0.0 && v < 1.0)
}

fn pivot_lhs(t: &[f64], k: usize, xs: f64) -> f64 {
    t.iter()
        .enumerate()
        .map(|(i, &ti)| {
            let v = xs + t[k] - ti;
            match i.cmp(&k) {
                std::cmp::Ordering::Less => v.min(1.0),
                std::cmp::Ordering::Equal => xs,
                std::cmp::Ordering::Greater => v.max(0.0),
            }
        })
        .sum()
}

/// Solves `Σ_{i<s} min{1, x_s + t_s − t_i} + x_s + Σ_{i>s} max{0, x_s + t_s − t_i} = s`,
/// `t_i = 1/(d_i² − 1)`, for the pivot `x_s ∈ (0,1)`.
///
/// `d` must be sorted non-increasing and lie entirely above or entirely
/// below 1; `s` is 1-based as a cardinality. Returns
/// [`LinxError::NoInteriorRoot`] when `t_{s+1} − t_s ≥ 1` (the 0/1 case).
pub fn solve_xs_equation(d: &[f64], s: usize) -> Result<f64> {
    let n = d.len();
    if s == 0 || s >= n {
        return Err(LinxError::InvalidCardinality { s, n });
    }
    if !d.windows(2).all(|w| w[0] >= w[1]) {
        return Err(LinxError::InvalidArgument(
            "d must be sorted non-increasing".into(),
        ));
    }
    if !all_same_side(d) {
        return Err(LinxError::InvalidArgument(
            "d must lie entirely above 1 or entirely in (0, 1)".into(),
        ));
    }
    let t: Vec<f64> = d.iter().map(|&v| inv_shift(v)).collect();
    let k = s - 1;
    if t[k + 1] - t[k] >= 1.0 {
        return Err(LinxError::NoInteriorRoot);
    }
    let target = s as f64;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if pivot_lhs(&t, k, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // finish with an exact solve on the linear piece containing the bracket
    let mid = 0.5 * (lo + hi);
    let slope = 1.0
        + t.iter()
            .enumerate()
            .filter(|&(i, &ti)| {
                let v = mid + t[k] - ti;
                (i < k && v < 1.0) || (i > k && v > 0.0)
            })
            .count() as f64;
    let refined = mid + (target - pivot_lhs(&t, k, mid)) / slope;
    let xs = if (lo - 1e-14..=hi + 1e-14).contains(&refined)
        && (pivot_lhs(&t, k, refined) - target).abs() <= (pivot_lhs(&t, k, mid) - target).abs()
    {
        refined
    } else {
        mid
    };
    Ok(xs.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
}

/// Optimal solution of one same-side block (all `d_i > 1` or all `< 1`), sorted.
fn solve_block(d: &[f64], s: usize) -> (Vec<f64>, Option<f64>) {
    let m = d.len();
    if s >= m {
        return (vec![1.0; m], None);
    }
    if s == 0 {
        return (vec![0.0; m], None);
    }
    let k = s - 1;
    let t: Vec<f64> = d.iter().map(|&v| inv_shift(v)).collect();
    if t[k + 1] - t[k] >= 1.0 {
        let x = (0..m).map(|i| if i < s { 1.0 } else { 0.0 }).collect();
        return (x, None);
    }
    let xs = solve_xs_equation(d, s).expect("interior case checked above");
    let x = (0..m)
        .map(|i| {
            let v = xs + t[k] - t[i];
            match i.cmp(&k) {
                std::cmp::Ordering::Less => v.min(1.0),
                std::cmp::Ordering::Equal => xs,
                std::cmp::Ordering::Greater => v.max(0.0),
            }
        })
        .collect();
    (x, Some(xs))
}

fn diagonal_value(d: &[f64], x: &[f64]) -> f64 {
    0.5 * d
        .iter()
        .zip(x)
        .map(|(&di, &xi)| ((di * di - 1.0) * xi + 1.0).ln())
        .sum::<f64>()
}

/// Optimal `x̂` of `linx(Diag(d), s)` via the G/E/L partition.
pub fn solve_diagonal_linx(d: &[f64], s: usize) -> Result<DiagonalSolution> {
    let n = d.len();
    if s == 0 || s >= n {
        return Err(LinxError::InvalidCardinality { s, n });
    }
    if let Some((index, &value)) = d
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
    {
        return Err(LinxError::NonPositiveDiagonal { index, value });
    }

    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let ds: Vec<f64> = perm
        .iter()
        .map(|&i| {
            if (d[i] - 1.0).abs() <= TOL_UNIT {
                1.0
            } else {
                d[i]
            }
        })
        .collect();

    let g = ds.iter().filter(|&&v| v > 1.0).count();
    let e = ds.iter().filter(|&&v| v == 1.0).count();
    let l = n - g - e;

    let mut xs = vec![0.0; n];
    let (pivot_value, case_tag) = if e == 0 && (g == 0 || l == 0) {
        let (x, pivot) = solve_block(&ds, s);
        xs.copy_from_slice(&x);
        let tag = if pivot.is_some() {
            CaseTag::InteriorCase
        } else {
            CaseTag::BinaryCase
        };
        (pivot, tag)
    } else if s <= g {
        let (x, pivot) = solve_block(&ds[..g], s);
        xs[..g].copy_from_slice(&x);
        (pivot, CaseTag::SplitG)
    } else if s <= g + e {
        xs[..g].fill(1.0);
        xs[g..g + e].fill((s - g) as f64 / e as f64);
        (None, CaseTag::SplitE)
    } else {
        xs[..g + e].fill(1.0);
        let (x, pivot) = solve_block(&ds[g + e..], s - g - e);
        xs[g + e..].copy_from_slice(&x);
        (pivot, CaseTag::SplitL)
    };

    let mut x = vec![0.0; n];
    for (pos, &orig) in perm.iter().enumerate() {
        x[orig] = xs[pos];
    }
    let value = diagonal_value(d, &x);
    Ok(DiagonalSolution {
        x_hat: FeasiblePoint::new(x, s)?,
        value,
        pivot_value,
        case_tag,
    })
}

/// `linx(Diag(d), s; γ)` through `f(C,s;γ;x) = f(√γ C, s; x) − ½ s ln γ`.
pub fn solve_diagonal_linx_scaled(d: &[f64], s: usize, gamma: f64) -> Result<DiagonalSolution> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(LinxError::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let root = gamma.sqrt();
    let scaled: Vec<f64> = d.iter().map(|v| v * root).collect();
    let mut sol = solve_diagonal_linx(&scaled, s)?;
    sol.value = diagonal_value(&scaled, sol.x_hat.as_slice()) - 0.5 * s as f64 * gamma.ln();
    Ok(sol)
}

/// First-order necessary conditions for a uniform optimal solution with
/// `d` sorted non-increasing: for all `i < j`, `q_j ≤ q_i`, with equality
/// whenever `1 > x_i ≥ x_j > 0`, where `q_i = (d_i² − 1)/((d_i² − 1)x_i + 1)`.
pub fn check_uniform_optimality(d: &[f64], s: usize, x: &FeasiblePoint) -> bool {
    let x = x.as_slice();
    if d.len() != x.len() || !d.windows(2).all(|w| w[0] >= w[1]) {
        return false;
    }
    let sum: f64 = x.iter().sum();
    if (sum - s as f64).abs() > 1e-8 {
        return false;
    }
    let q: Vec<f64> = d
        .iter()
        .zip(x)
        .map(|(&di, &xi)| {
            let k = di * di - 1.0;
            k / (k * xi + 1.0)
        })
        .collect();
    let n = d.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let tol = TOL_FIRST_ORDER * q[i].abs().max(q[j].abs()).max(1.0);
            if q[j] > q[i] + tol {
                return false;
            }
            let interior = x[i] < 1.0 && x[i] >= x[j] && x[j] > 0.0;
            if interior && (q[i] - q[j]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// `γ̂ = 1/d_s²`, the scaling that forces a 0/1 optimum for diagonal `C`.
pub fn optimal_gamma_diagonal(d: &[f64], s: usize) -> Result<f64> {
    let n = d.len();
    if s == 0 || s > n {
        return Err(LinxError::InvalidCardinality { s, n });
    }
    if let Some((index, &value)) = d.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(LinxError::NonPositiveDiagonal { index, value });
    }
    let mut sorted = d.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(1.0 / (sorted[s - 1] * sorted[s - 1]))
}

fn check_psd_2x2(a: f64, b: f64, c: f64) -> Result<()> {
    let tol = 1e-12 * a.abs().max(b.abs()).max(1.0).powi(2);
    if a < 0.0 || b < 0.0 || a * b - c * c < -tol {
        return Err(LinxError::NotPsd {
            min_eigenvalue: 0.5 * (a + b - ((a - b).powi(2) + 4.0 * c * c).sqrt()),
            tol,
        });
    }
    Ok(())
}

/// Off-diagonal `m*` of an optimal 2×2 mask for `linx(C₂, 1; M₂)` with
/// `C₂ = [[a, c], [c, b]]`. The non-negative representative is returned.
pub fn optimal_mask_2x2(a: f64, b: f64, c: f64) -> Result<f64> {
    check_psd_2x2(a, b, c)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    let ratio = (a * b - 1.0) / (c * c);
    Ok(if ratio >= 1.0 {
        1.0
    } else if ratio <= 0.0 {
        0.0
    } else {
        ratio.sqrt()
    })
}

/// `γ̂ = (a² − c²)/(ab − c²)²` with `a ≥ b` (swapped otherwise).
pub fn optimal_gamma_2x2(a: f64, b: f64, c: f64) -> Result<f64> {
    check_psd_2x2(a, b, c)?;
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    let det = a * b - c * c;
    if det <= 1e-14 * (a * b).max(f64::MIN_POSITIVE) {
        return Err(LinxError::Singular);
    }
    Ok((a * a - c * c) / (det * det))
}

/// Left side of the binary-optimality condition `2(a² − c²)γ − (c² − ab)²γ² − 1 ≥ 0`.
pub fn binary_condition_2x2(a: f64, b: f64, c: f64, gamma: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    2.0 * (a * a - c * c) * gamma - (c * c - a * b).powi(2) * gamma * gamma - 1.0
}

/// `½ Σ ln((s/n) λ_i² + 1 − s/n)`, the linx value at `x = (s/n) e`.
pub fn eigenvalue_lower_bound(inst: &Instance, s: usize) -> f64 {
    eigenvalue_lower_bound_scaled(inst, s, 1.0)
}

/// `½ (Σ ln(γ (s/n) λ_i² + 1 − s/n) − s ln γ)`.
pub fn eigenvalue_lower_bound_scaled(inst: &Instance, s: usize, gamma: f64) -> f64 {
    let frac = s as f64 / inst.n() as f64;
    let sum: f64 = inst
        .eigvals()
        .iter()
        .map(|&l| (gamma * frac * l * l + 1.0 - frac).ln())
        .sum();
    0.5 * (sum - s as f64 * gamma.ln())
}

/// `linx(C₂, 1; M₂*)` at `γ = 1`, with `M₂*` from [`optimal_mask_2x2`].
pub fn masked_bound_2x2(a: f64, b: f64, c: f64) -> Result<f64> {
    let m = optimal_mask_2x2(a, b, c)?;
    let inst = validate(SymMatrix::from_rows(&[vec![a, c], vec![c, b]])?, 1)?;
    let mask = if m == 1.0 {
        Mask::all_ones(2)
    } else if m == 0.0 {
        Mask::identity(2)
    } else {
        Mask::new(SymMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[1.0, m, m, 1.0],
        ))?)?
    };
    let opts = SolverOptions {
        tol_fw: 1e-12,
        ..SolverOptions::default()
    };
    Ok(solve_linx(&inst, 1, &mask, 1.0, &opts)?.value)
}

/// `½ ln(((c² + 1 − ab)² + (a + b)²) / (4 g))`, `g = exp(2 linx(C₂, 1; M₂*))`:
/// a lower bound on how much the optimal 2×2 mask improves the plain bound.
pub fn gap_lower_bound_2x2(a: f64, b: f64, c: f64) -> Result<f64> {
    let g = (2.0 * masked_bound_2x2(a, b, c)?).exp();
    let num = (c * c + 1.0 - a * b).powi(2) + (a + b).powi(2);
    Ok(0.5 * (num / (4.0 * g)).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    /// Independent oracle: bisection on the pivot equation written out directly.
    fn pivot_oracle(d: &[f64], s: usize) -> f64 {
        let t: Vec<f64> = d.iter().map(|v| 1.0 / (v * v - 1.0)).collect();
        let k = s - 1;
        let lhs = |x: f64| {
            let mut total = x;
            for i in 0..k {
                total += f64::min(1.0, x + t[k] - t[i]);
            }
            for i in (k + 1)..d.len() {
                total += f64::max(0.0, x + t[k] - t[i]);
            }
            total
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lhs(mid) < s as f64 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn pivot_examples() {
        let xs = solve_xs_equation(&[2.0, 1.5], 1).unwrap();
        assert!((xs - 11.0 / 15.0).abs() < 1e-14);
        assert!((xs - pivot_oracle(&[2.0, 1.5], 1)).abs() < 1e-14);

        let xs = solve_xs_equation(&[1.7; 4], 1).unwrap();
        assert!((xs - 0.25).abs() < 1e-14);

        let d = [0.5, 0.45];
        let xs = solve_xs_equation(&d, 1).unwrap();
        let oracle = pivot_oracle(&d, 1);
        assert!((xs - oracle).abs() < 1e-13);
        // x₁ − x₂ = 1/(d₂² − 1) − 1/(d₁² − 1) at an interior optimum
        let x2 = 1.0 - xs;
        let rhs = 1.0 / (0.2025 - 1.0) - 1.0 / (0.25 - 1.0);
        assert!((xs - x2 - rhs).abs() < 1e-12);
    }

    #[test]
    fn pivot_errors() {
        assert!(matches!(
            solve_xs_equation(&[2.0, 1.2], 1),
            Err(LinxError::NoInteriorRoot)
        ));
        assert!(solve_xs_equation(&[2.0, 0.5], 1).is_err());
        assert!(solve_xs_equation(&[1.5, 2.0], 1).is_err());
        assert!(solve_xs_equation(&[2.0, 1.5], 2).is_err());
    }

    #[test]
    fn diagonal_examples() {
        let sol = solve_diagonal_linx(&[2.0, 1.5, 0.5], 1).unwrap();
        let x = sol.x_hat.as_slice();
        assert!((x[0] - 11.0 / 15.0).abs() < 1e-14);
        assert!((x[1] - 4.0 / 15.0).abs() < 1e-14);
        assert_eq!(x[2], 0.0);
        assert_eq!(sol.case_tag, CaseTag::SplitG);
        assert!((sol.value - 0.5 * (3.2f64 * 4.0 / 3.0).ln()).abs() < 1e-14);

        let sol = solve_diagonal_linx(&[3.0, 1.0, 1.0, 0.5], 2).unwrap();
        assert_eq!(sol.x_hat.as_slice(), &[1.0, 0.5, 0.5, 0.0]);
        assert_eq!(sol.case_tag, CaseTag::SplitE);

        let sol = solve_diagonal_linx(&[2.0, 1.2], 1).unwrap();
        assert_eq!(sol.x_hat.as_slice(), &[1.0, 0.0]);
        assert_eq!(sol.case_tag, CaseTag::BinaryCase);
        assert_eq!(sol.pivot_value, None);
    }

    #[test]
    fn diagonal_unsorted_input_and_split_l() {
        // d = (0.45, 1.2, 0.5), s = 2: G = {1.2}, L = {0.5, 0.45}
        let sol = solve_diagonal_linx(&[0.45, 1.2, 0.5], 2).unwrap();
        assert_eq!(sol.case_tag, CaseTag::SplitL);
        let x = sol.x_hat.as_slice();
        assert_eq!(x[1], 1.0);
        let t = |v: f64| 1.0 / (v * v - 1.0);
        assert!(t(0.45) - t(0.5) < 1.0);
        let pivot = pivot_oracle(&[0.5, 0.45], 1);
        assert!((x[2] - pivot).abs() < 1e-13);
        assert!((x[0] + x[2] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn maskgap_diagonal_is_uniform() {
        let d = vec![FRAC_1_SQRT_2; 6];
        let sol = solve_diagonal_linx(&d, 3).unwrap();
        assert!(sol
            .x_hat
            .as_slice()
            .iter()
            .all(|&v| (v - 0.5).abs() < 1e-14));
        assert!((sol.value - 3.0 * 0.75f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn uniform_optimality_examples() {
        let x = FeasiblePoint::new(vec![11.0 / 15.0, 4.0 / 15.0, 0.0], 1).unwrap();
        assert!(check_uniform_optimality(&[2.0, 1.5, 0.5], 1, &x));
        let x = FeasiblePoint::new(vec![1.0, 0.0], 1).unwrap();
        assert!(!check_uniform_optimality(&[2.0, 1.5], 1, &x));
        let x = FeasiblePoint::new(vec![0.5, 0.5], 1).unwrap();
        assert!(check_uniform_optimality(&[1.0, 1.0], 1, &x));
    }

    #[test]
    fn gamma_formulas() {
        assert_eq!(optimal_gamma_diagonal(&[2.0, 1.5, 0.5], 1).unwrap(), 0.25);
        assert_eq!(optimal_gamma_diagonal(&[1.0; 5], 3).unwrap(), 1.0);
        assert!((optimal_gamma_diagonal(&[2.0, 1.5, 0.5], 2).unwrap() - 1.0 / 2.25).abs() < 1e-15);

        assert_eq!(optimal_gamma_2x2(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(optimal_gamma_2x2(2.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(optimal_gamma_2x2(2.0, 1.0, 1.0).unwrap(), 3.0);
        assert_eq!(optimal_gamma_2x2(1.0, 2.0, 1.0).unwrap(), 3.0);
        assert!(matches!(
            optimal_gamma_2x2(1.0, 1.0, 1.0),
            Err(LinxError::Singular)
        ));
        assert!(optimal_gamma_2x2(1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn mask_formulas() {
        let r2 = std::f64::consts::SQRT_2;
        assert_eq!(optimal_mask_2x2(2.0, 2.0, r2).unwrap(), 1.0);
        assert_eq!(optimal_mask_2x2(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!((optimal_mask_2x2(1.5, 1.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(optimal_mask_2x2(3.0, 2.0, 0.0).unwrap(), 0.0);
        assert!(optimal_mask_2x2(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn eigenvalue_bound_examples() {
        let inst = validate(SymMatrix::identity(5), 2).unwrap();
        assert!(eigenvalue_lower_bound(&inst, 2).abs() < 1e-14);
        let inst = validate(SymMatrix::ones(2), 1).unwrap();
        assert!((eigenvalue_lower_bound(&inst, 1) - 0.5 * 1.25f64.ln()).abs() < 1e-14);
        let h = FRAC_1_SQRT_2;
        let inst = validate(SymMatrix::from_rows(&[vec![h, h], vec![h, h]]).unwrap(), 1).unwrap();
        assert!((eigenvalue_lower_bound(&inst, 1) - 0.5 * 0.75f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn gap_bound_examples() {
        let h = FRAC_1_SQRT_2;
        let v = gap_lower_bound_2x2(h, h, h).unwrap();
        assert!((v - 0.5 * (4.0f64 / 3.0).ln()).abs() < 1e-10, "{v}");
        assert!(gap_lower_bound_2x2(1.0, 1.0, 0.0).unwrap().abs() < 1e-12);
        let v = gap_lower_bound_2x2(1.0, 1.0, 1.0).unwrap();
        assert!((v - 0.5 * 1.25f64.ln()).abs() < 1e-10, "{v}");
    }

    #[test]
    fn binary_condition_at_optimal_gamma() {
        let (a, b, c) = (2.0, 1.0, 1.0);
        let g = optimal_gamma_2x2(a, b, c).unwrap();
        // maximum value (a² − c²)²/(ab − c²)² − 1 = 8
        assert!((binary_condition_2x2(a, b, c, g) - 8.0).abs() < 1e-12);
    }
}
