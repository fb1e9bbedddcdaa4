//! The masked, scaled linx bound
//!
//! ```text
//! f(C,s;M,γ;x) = ½ ( ldet(γ (C∘M) Diag(x) (C∘M) + Diag(e − x)) − s ln γ )
//! linx(C,s;M,γ) = max { f(C,s;M,γ;x) : x ∈ P(n,s) }
//! ```
//!
//! evaluated through one Cholesky factorization per point and maximized
//! with the conditional-gradient solver in [`crate::frank_wolfe`].

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::Serialize;

use crate::error::{LinxError, Result};
use crate::frank_wolfe::{self, ConcaveObjective};
use crate::instance::{Instance, Mask, MaskKind};

pub use crate::frank_wolfe::lmo_capped_simplex;

/// Bound tolerance on `[0,1]` membership and on `|Σx − s|`.
pub const TOL_FEAS: f64 = 1e-10;
/// Squared Cholesky pivots at or below `PIVOT_RTOL · n · max F_ii` count as singular.
const PIVOT_RTOL: f64 = 1e-14;
pub const TOL_BINARY: f64 = 1e-6;

/// A point of the capped simplex `P(n, s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FeasiblePoint(Vec<f64>);

impl FeasiblePoint {
    pub fn new(x: Vec<f64>, s: usize) -> Result<Self> {
        if let Some((i, v)) = x
            .iter()
            .enumerate()
            .find(|(_, &v)| !(-TOL_FEAS..=1.0 + TOL_FEAS).contains(&v))
        {
            return Err(LinxError::InvalidPoint(format!(
                "x[{i}] = {v} outside [0, 1]"
            )));
        }
        let sum: f64 = x.iter().sum();
        if (sum - s as f64).abs() > TOL_FEAS {
            return Err(LinxError::InvalidPoint(format!(
                "sum {sum} differs from s = {s}"
            )));
        }
        Ok(Self(x))
    }

    /// `(s/n) e`, the solver's starting point.
    pub fn uniform(n: usize, s: usize) -> Self {
        Self(vec![s as f64 / n as f64; n])
    }

    /// Indicator vector of `subset` (0-based indices).
    pub fn indicator(n: usize, subset: &[usize]) -> Self {
        let mut x = vec![0.0; n];
        for &i in subset {
            x[i] = 1.0;
        }
        Self(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every coordinate is within `tol` of 0 or 1.
    pub fn is_binary(&self, tol: f64) -> bool {
        self.0
            .iter()
            .all(|&v| v.abs() <= tol || (1.0 - v).abs() <= tol)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stopping tolerance on the duality gap, relative to `max(1, |f(x₀)|)`.
    pub tol_fw: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_fw: 1e-8,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    pub value: f64,
    pub x_hat: FeasiblePoint,
    pub duality_gap: f64,
    pub gamma: f64,
    pub mask: MaskKind,
    pub iterations: usize,
    pub converged: bool,
}

/// `f(·)` for a fixed `A = C∘M`, `γ` and `s`.
pub(crate) struct LinxObjective {
    a: DMatrix<f64>,
    gamma: f64,
    s: usize,
}

impl LinxObjective {
    pub(crate) fn new(inst: &Instance, mask: &Mask, gamma: f64, s: usize) -> Result<Self> {
        check_gamma(gamma)?;
        if mask.n() != inst.n() {
            return Err(LinxError::DimensionMismatch {
                expected: inst.n(),
                found: mask.n(),
            });
        }
        let a = match mask.kind() {
            MaskKind::AllOnes => inst.matrix().as_matrix().clone(),
            _ => inst.matrix().hadamard(mask.matrix())?.as_matrix().clone(),
        };
        Ok(Self { a, gamma, s })
    }

    fn factor(&self, x: &[f64]) -> Option<Cholesky<f64, Dyn>> {
        let n = self.a.nrows();
        let mut ax = self.a.clone();
        for (j, &xj) in x.iter().enumerate() {
            ax.column_mut(j).scale_mut(xj);
        }
        let mut f = ax * &self.a;
        f.scale_mut(self.gamma);
        for i in 0..n {
            f[(i, i)] += 1.0 - x[i];
        }
        let scale = f.diagonal().amax();
        let chol = Cholesky::new(f)?;
        // pivots at rounding level mean F is singular
        let floor = PIVOT_RTOL * n as f64 * scale;
        if chol.l_dirty().diagonal().iter().any(|&l| l * l <= floor) {
            return None;
        }
        Some(chol)
    }

    fn value_from(&self, chol: &Cholesky<f64, Dyn>) -> f64 {
        let ldet = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        0.5 * (ldet - self.s as f64 * self.gamma.ln())
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        self.factor(x)
            .map(|c| self.value_from(&c))
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// `d/dψ f` at `γ = e^ψ` with `x` held fixed:
    /// `½ (n − s − Σ (1 − x_i) [F⁻¹]_ii)`.
    pub(crate) fn psi_derivative(&self, x: &[f64]) -> Option<f64> {
        let inv = self.factor(x)?.inverse();
        let n = x.len();
        let trace: f64 = (0..n).map(|i| (1.0 - x[i]) * inv[(i, i)]).sum();
        Some(0.5 * (n as f64 - self.s as f64 - trace))
    }
}

impl ConcaveObjective for LinxObjective {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let chol = self.factor(x)?;
        let value = self.value_from(&chol);
        let inv = chol.inverse();
        let w = &inv * &self.a;
        let n = x.len();
        let grad = (0..n)
            .map(|i| {
                let afa: f64 = self.a.column(i).dot(&w.column(i));
                0.5 * (self.gamma * afa - inv[(i, i)])
            })
            .collect();
        Some((value, grad))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(LinxError::InvalidArgument(format!(
            "scaling parameter must be positive and finite, got {gamma}"
        )))
    }
}

fn check_cardinality(n: usize, s: usize) -> Result<()> {
    if s == 0 || s >= n {
        Err(LinxError::InvalidCardinality { s, n })
    } else {
        Ok(())
    }
}

fn sum_as_s(x: &FeasiblePoint) -> usize {
    x.as_slice().iter().sum::<f64>().round() as usize
}

/// `f(C,s;M,γ;x)`; `-inf` where the inner matrix is not positive definite.
pub fn linx_objective(inst: &Instance, mask: &Mask, gamma: f64, x: &FeasiblePoint) -> Result<f64> {
    let obj = LinxObjective::new(inst, mask, gamma, sum_as_s(x))?;
    Ok(obj.value(x.as_slice()))
}

/// `f(C,s;M,γ;x)` for any `x ∈ [0,1]ⁿ`, with `s` given explicitly rather
/// than read off `Σx`. Useful for finite differences along coordinates.
pub fn linx_objective_in_box(
    inst: &Instance,
    mask: &Mask,
    gamma: f64,
    s: usize,
    x: &[f64],
) -> Result<f64> {
    if x.len() != inst.n() {
        return Err(LinxError::DimensionMismatch {
            expected: inst.n(),
            found: x.len(),
        });
    }
    if let Some((i, v)) = x
        .iter()
        .enumerate()
        .find(|(_, &v)| !(0.0..=1.0).contains(&v))
    {
        return Err(LinxError::InvalidPoint(format!(
            "x[{i}] = {v} outside [0, 1]"
        )));
    }
    Ok(LinxObjective::new(inst, mask, gamma, s)?.value(x))
}

/// `∂f/∂x_i = ½ (γ [A F⁻¹ A]_ii − [F⁻¹]_ii)` with `A = C∘M`.
pub fn linx_gradient(
    inst: &Instance,
    mask: &Mask,
    gamma: f64,
    x: &FeasiblePoint,
) -> Result<Vec<f64>> {
    let obj = LinxObjective::new(inst, mask, gamma, sum_as_s(x))?;
    obj.value_and_gradient(x.as_slice())
        .map(|(_, g)| g)
        .ok_or(LinxError::Singular)
}

/// Maximizes `f(C,s;M,γ;·)` over `P(n,s)` from `x₀ = (s/n) e`.
///
/// Hitting `max_iter` is not an error: the last (best) iterate comes back
/// with `converged = false`.
pub fn solve_linx(
    inst: &Instance,
    s: usize,
    mask: &Mask,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    let n = inst.n();
    check_cardinality(n, s)?;
    let obj = LinxObjective::new(inst, mask, gamma, s)?;
    let out = frank_wolfe::maximize(
        &obj,
        s,
        FeasiblePoint::uniform(n, s).into_vec(),
        opts.tol_fw,
        opts.max_iter,
    )?;
    Ok(BoundResult {
        value: out.value,
        x_hat: FeasiblePoint(out.x),
        duality_gap: out.gap.max(0.0),
        gamma,
        mask: mask.kind(),
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// A converged maximizer lying in `{0,1}ⁿ` proves that `γ` minimizes the
/// scaled bound, because the relaxation is exact on binary points.
pub fn certify_gamma_optimal(result: &BoundResult, tol_binary: f64) -> bool {
    result.converged && result.x_hat.is_binary(tol_binary)
}
