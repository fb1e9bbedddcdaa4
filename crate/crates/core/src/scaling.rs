//! Choice of the scaling parameter `γ`.
//!
//! With `ψ = ln γ` the optimized bound `linx(C,s;M,e^ψ)` is convex in `ψ`.
//! Its behaviour as `γ → ∞` depends on `rank(C∘M)` against `s`: coercive
//! (finite minimizer) when `s < rank`, non-increasing towards a finite limit
//! when `s = rank`, and unbounded below when `s > rank`.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::Serialize;

use crate::diagonal::{optimal_gamma_2x2, optimal_gamma_diagonal};
use crate::error::{LinxError, Result};
use crate::frank_wolfe::{self, ConcaveObjective};
use crate::instance::{Instance, Mask, MaskKind};
use crate::linx::{
    certify_gamma_optimal, solve_linx, BoundResult, FeasiblePoint, LinxObjective, SolverOptions,
    TOL_BINARY,
};
use crate::num::serialize_f64;

/// Final bracket width in `ψ`.
pub const PSI_TOL: f64 = 1e-6;
/// Bracket expansion gives up past this `|ψ|`.
pub const PSI_LIMIT: f64 = 512.0;
/// `ψ` at which the unbounded regime is probed for its diagnostic.
pub const PSI_UNBOUNDED_PROBE: f64 = 14.0;
/// Inner solver tolerance used during the search, so value comparisons
/// stay meaningful at the final bracket width.
const SEARCH_TOL_FW: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeTag {
    InteriorOptimum,
    LimitAtInfinity,
    UnboundedBelow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GammaRegime {
    pub tag: RegimeTag,
    pub rank: usize,
    pub s: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaSearchResult {
    /// `+inf` in the limit and unbounded regimes.
    #[serde(serialize_with = "serialize_f64")]
    pub gamma_hat: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub bound_value: f64,
    /// `(ψ, bound)` for every probe, in evaluation order.
    pub psi_trace: Vec<(f64, f64)>,
    pub regime: GammaRegime,
    pub x_hat: Option<FeasiblePoint>,
    /// A probe returned a binary maximizer, which proves `γ̂` optimal.
    pub certified: bool,
    /// Every inner solve met its gap tolerance.
    pub converged: bool,
    pub diagnostic: Option<String>,
}

pub fn classify_regime(inst: &Instance, s: usize) -> GammaRegime {
    let rank = inst.rank();
    let tag = match s.cmp(&rank) {
        std::cmp::Ordering::Less => RegimeTag::InteriorOptimum,
        std::cmp::Ordering::Equal => RegimeTag::LimitAtInfinity,
        std::cmp::Ordering::Greater => RegimeTag::UnboundedBelow,
    };
    GammaRegime { tag, rank, s }
}

struct Probe {
    psi: f64,
    result: BoundResult,
    slope: f64,
}

struct Search<'a> {
    inst: &'a Instance,
    mask: &'a Mask,
    s: usize,
    opts: SolverOptions,
    probes: Vec<Probe>,
}

impl Search<'_> {
    /// Solves at `γ = e^ψ`; the `ψ`-slope of the optimal value is the
    /// partial derivative at the maximizer.
    fn probe(&mut self, psi: f64) -> Result<usize> {
        let wrap = |e: LinxError| LinxError::GammaSearch {
            psi,
            source: Box::new(e),
        };
        let gamma = psi.exp();
        let result = solve_linx(self.inst, self.s, self.mask, gamma, &self.opts).map_err(wrap)?;
        let obj = LinxObjective::new(self.inst, self.mask, gamma, self.s).map_err(wrap)?;
        let slope = obj
            .psi_derivative(result.x_hat.as_slice())
            .unwrap_or(f64::NAN);
        self.probes.push(Probe { psi, result, slope });
        Ok(self.probes.len() - 1)
    }

    fn certified(&self, i: usize) -> bool {
        certify_gamma_optimal(&self.probes[i].result, TOL_BINARY)
    }

    fn value(&self, i: usize) -> f64 {
        self.probes[i].result.value
    }

    fn finish(self, regime: GammaRegime, pick: Option<usize>) -> GammaSearchResult {
        let best = pick.unwrap_or_else(|| {
            (0..self.probes.len())
                .min_by(|&a, &b| self.value(a).total_cmp(&self.value(b)))
                .expect("at least one probe")
        });
        let certified = certify_gamma_optimal(&self.probes[best].result, TOL_BINARY);
        let converged = self.probes.iter().all(|p| p.result.converged);
        let p = &self.probes[best];
        GammaSearchResult {
            gamma_hat: p.result.gamma,
            bound_value: p.result.value,
            psi_trace: self
                .probes
                .iter()
                .map(|p| (p.psi, p.result.value))
                .collect(),
            regime,
            x_hat: Some(p.result.x_hat.clone()),
            certified,
            converged,
            diagnostic: None,
        }
    }
}

/// Closed-form candidates for `γ̂` on the effective matrix `C∘M`.
fn seed_gammas(eff: &Instance, s: usize) -> Vec<f64> {
    let c = eff.matrix();
    let mut seeds = Vec::new();
    if c.is_diagonal() {
        if let Ok(g) = optimal_gamma_diagonal(c.diagonal().as_slice(), s) {
            seeds.push(g);
        }
    }
    if c.n() == 2 && s == 1 {
        if let Ok(g) = optimal_gamma_2x2(c.get(0, 0), c.get(1, 1), c.get(0, 1)) {
            seeds.push(g);
        }
    }
    seeds
}

/// Minimizes `linx(C,s;M,γ)` over `γ > 0`.
///
/// The regime comes from the rank of `C∘M`. In the interior regime the
/// bracket starts at `ψ ∈ [−2, 2]` and doubles outward until the slope
/// changes sign, followed by golden-section search to width [`PSI_TOL`].
/// Any probe with a binary maximizer ends the search early.
pub fn optimize_gamma(
    inst: &Instance,
    s: usize,
    mask: &Mask,
    opts: &SolverOptions,
) -> Result<GammaSearchResult> {
    let eff = inst.masked(mask)?;
    let regime = classify_regime(&eff, s);
    match regime.tag {
        RegimeTag::LimitAtInfinity => {
            let lim = limit_linx_at_infinity(&eff, s, opts)?;
            return Ok(GammaSearchResult {
                gamma_hat: f64::INFINITY,
                bound_value: lim.value,
                psi_trace: Vec::new(),
                regime,
                x_hat: Some(lim.x_hat),
                certified: false,
                converged: lim.converged,
                diagnostic: Some(format!(
                    "s = rank = {s}: the bound is non-increasing in gamma; value is the limit as gamma -> inf"
                )),
            });
        }
        RegimeTag::UnboundedBelow => {
            let mut search = Search {
                inst,
                mask,
                s,
                opts: *opts,
                probes: Vec::new(),
            };
            search.probe(PSI_UNBOUNDED_PROBE)?;
            let at_probe = search.value(0);
            let mut out = search.finish(regime, Some(0));
            out.gamma_hat = f64::INFINITY;
            out.bound_value = f64::NEG_INFINITY;
            out.x_hat = None;
            out.certified = false;
            out.diagnostic = Some(format!(
                "s = {s} exceeds rank {}: no optimal gamma, the bound tends to -inf (value {at_probe} at psi = {PSI_UNBOUNDED_PROBE})",
                regime.rank
            ));
            return Ok(out);
        }
        RegimeTag::InteriorOptimum => {}
    }

    let mut search = Search {
        inst,
        mask,
        s,
        opts: SolverOptions {
            tol_fw: opts.tol_fw.min(SEARCH_TOL_FW),
            max_iter: opts.max_iter,
        },
        probes: Vec::new(),
    };

    for g in seed_gammas(&eff, s) {
        let i = search.probe(g.ln())?;
        if search.certified(i) {
            return Ok(search.finish(regime, Some(i)));
        }
    }

    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    let mut i_lo = search.probe(lo)?;
    if search.certified(i_lo) {
        return Ok(search.finish(regime, Some(i_lo)));
    }
    let mut hi_right_of_min = false;
    while search.probes[i_lo].slope > 0.0 {
        hi = lo;
        hi_right_of_min = true;
        lo *= 2.0;
        if lo < -PSI_LIMIT {
            return Err(LinxError::BracketFailure { limit: PSI_LIMIT });
        }
        i_lo = search.probe(lo)?;
        if search.certified(i_lo) {
            return Ok(search.finish(regime, Some(i_lo)));
        }
    }
    if !hi_right_of_min {
        let mut i_hi = search.probe(hi)?;
        if search.certified(i_hi) {
            return Ok(search.finish(regime, Some(i_hi)));
        }
        while search.probes[i_hi].slope < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > PSI_LIMIT {
                return Err(LinxError::BracketFailure { limit: PSI_LIMIT });
            }
            i_hi = search.probe(hi)?;
            if search.certified(i_hi) {
                return Ok(search.finish(regime, Some(i_hi)));
            }
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut ia = search.probe(a)?;
    let mut ib = search.probe(b)?;
    while hi - lo > PSI_TOL {
        for i in [ia, ib] {
            if search.certified(i) {
                return Ok(search.finish(regime, Some(i)));
            }
        }
        if search.value(ia) <= search.value(ib) {
            hi = b;
            b = a;
            ib = ia;
            a = hi - inv_phi * (hi - lo);
            ia = search.probe(a)?;
        } else {
            lo = a;
            a = b;
            ia = ib;
            b = lo + inv_phi * (hi - lo);
            ib = search.probe(b)?;
        }
    }
    Ok(search.finish(regime, None))
}

/// Objective of the `γ → ∞` limit program for `s = rank(C)`:
/// `½ (ldet(Λ_s P_s Λ_s) + ldet(I − P_{n−s}))` with `P = QᵀDiag(x)Q`.
struct LimitObjective {
    /// Rows of `Q_s` and `Q_{n−s}` indexed by coordinate.
    qs: DMatrix<f64>,
    qr: DMatrix<f64>,
    log_lambda: f64,
}

const LIMIT_PIVOT_RTOL: f64 = 1e-14;

fn guarded_cholesky(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.nrows() == 0 {
        return Cholesky::new(m);
    }
    let floor = LIMIT_PIVOT_RTOL * m.nrows() as f64 * m.diagonal().amax();
    let chol = Cholesky::new(m)?;
    if chol.l_dirty().diagonal().iter().any(|&l| l * l <= floor) {
        return None;
    }
    Some(chol)
}

fn weighted_gram(q: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    let mut qx = q.clone();
    for (i, &xi) in x.iter().enumerate() {
        qx.row_mut(i).scale_mut(xi);
    }
    q.transpose() * qx
}

fn chol_logdet(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

impl ConcaveObjective for LimitObjective {
    fn dim(&self) -> usize {
        self.qs.nrows()
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let n = x.len();
        let ps = weighted_gram(&self.qs, x);
        let r = self.qr.ncols();
        let ir = DMatrix::identity(r, r) - weighted_gram(&self.qr, x);
        let cs = guarded_cholesky(ps)?;
        let cr = guarded_cholesky(ir)?;
        let value = 0.5 * (self.log_lambda + chol_logdet(&cs) + chol_logdet(&cr));
        let ps_inv = cs.inverse();
        let ir_inv = cr.inverse();
        let ws = &self.qs * ps_inv;
        let wr = &self.qr * ir_inv;
        let grad = (0..n)
            .map(|i| {
                let a = self.qs.row(i).dot(&ws.row(i));
                let b = self.qr.row(i).dot(&wr.row(i));
                0.5 * (a - b)
            })
            .collect();
        Some((value, grad))
    }
}

/// `lim_{γ→∞} linx(C, s; γ)` for `s = rank(C)`, from the limit program.
/// `gamma` in the result is `+inf`.
pub fn limit_linx_at_infinity(
    inst: &Instance,
    s: usize,
    opts: &SolverOptions,
) -> Result<BoundResult> {
    let n = inst.n();
    if s == 0 || s >= n {
        return Err(LinxError::InvalidCardinality { s, n });
    }
    if s != inst.rank() {
        return Err(LinxError::RegimeMismatch {
            s,
            rank: inst.rank(),
        });
    }
    let q = inst.eigvecs();
    let obj = LimitObjective {
        qs: q.columns(0, s).into_owned(),
        qr: q.columns(s, n - s).into_owned(),
        log_lambda: 2.0 * inst.eigvals()[..s].iter().map(|l| l.ln()).sum::<f64>(),
    };
    let out = frank_wolfe::maximize(
        &obj,
        s,
        FeasiblePoint::uniform(n, s).into_vec(),
        opts.tol_fw,
        opts.max_iter,
    )?;
    Ok(BoundResult {
        value: out.value,
        x_hat: FeasiblePoint::new(out.x, s)?,
        duality_gap: out.gap.max(0.0),
        gamma: f64::INFINITY,
        mask: MaskKind::AllOnes,
        iterations: out.iterations,
        converged: out.converged,
    })
}
