//! Conditional-gradient maximization of a concave function over the capped
//! simplex `P(n, s) = { x : Σx = s, 0 ≤ x ≤ 1 }`.
//!
//! Each iteration pairs the Frank–Wolfe vertex (top-`s` gradient entries)
//! with an away vertex taken from the smallest face containing the iterate,
//! and moves along their difference. The away vertex needs no active-set
//! bookkeeping: on `P(n, s)` it is the bottom-`m` gradient selection among
//! the fractional coordinates, with coordinates at 0 and 1 held fixed.
//! The Frank–Wolfe duality gap `max_v ∇f(x)ᵀ(v − x)` is the stopping
//! certificate.

use crate::error::{LinxError, Result};

/// Coordinates within this distance of 0 or 1 are treated as on the bound
/// when building the away vertex.
const FACE_EPS: f64 = 1e-12;
const LINE_SEARCH_MAX_EVALS: usize = 80;

/// Concave objective on `[0,1]^n`, possibly `-inf` on part of it.
pub(crate) trait ConcaveObjective {
    fn dim(&self) -> usize;

    /// Value and gradient at `x`, or `None` where the objective is `-inf`
    /// (factorization failure).
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone)]
pub(crate) struct FwOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Vertex of `P(n, s)` maximizing `gᵀx`: ones on the `s` largest entries,
/// ties going to the lowest index.
pub fn lmo_capped_simplex(g: &[f64], s: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    // stable sort keeps lower indices first among equal entries
    order.sort_by(|&a, &b| g[b].total_cmp(&g[a]));
    let mut v = vec![0.0; g.len()];
    for &i in order.iter().take(s) {
        v[i] = 1.0;
    }
    v
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max_{v ∈ P(n,s)} gᵀ(v − x)`.
pub fn duality_gap(g: &[f64], x: &[f64], s: usize) -> f64 {
    let v = lmo_capped_simplex(g, s);
    dot(g, &v) - dot(g, x)
}

/// Minimizer of `gᵀv` over vertices of the smallest face of `P(n, s)` containing `x`.
fn away_vertex(g: &[f64], x: &[f64], s: usize) -> Vec<f64> {
    let mut a = vec![0.0; x.len()];
    let mut ones = 0usize;
    let mut free = Vec::new();
    for (i, &xi) in x.iter().enumerate() {
        if xi >= 1.0 - FACE_EPS {
            a[i] = 1.0;
            ones += 1;
        } else if xi > FACE_EPS {
            free.push(i);
        }
    }
    let m = s.saturating_sub(ones).min(free.len());
    // smallest gradients first; among ties prefer the highest index so the
    // away and FW choices do not cancel
    free.sort_by(|&p, &q| g[p].total_cmp(&g[q]).then(q.cmp(&p)));
    for &i in free.iter().take(m) {
        a[i] = 1.0;
    }
    a
}

struct Probe {
    alpha: f64,
    value: f64,
    grad: Vec<f64>,
    x: Vec<f64>,
}

fn step_point(x: &[f64], d: &[f64], alpha: f64, at_max: bool) -> Vec<f64> {
    x.iter()
        .zip(d)
        .map(|(&xi, &di)| {
            let v = xi + alpha * di;
            if at_max && di != 0.0 {
                // blocking coordinates land exactly on their bound
                if di > 0.0 && (1.0 - v).abs() <= 1e-12 {
                    return 1.0;
                }
                if di < 0.0 && v.abs() <= 1e-12 {
                    return 0.0;
                }
            }
            v.clamp(0.0, 1.0)
        })
        .collect()
}

/// Exact line search on the concave restriction `φ(α) = f(x + αd)`,
/// `α ∈ [0, α_max]`, by Illinois regula falsi on `φ'`. Points where the
/// objective is `-inf` shrink the bracket from above.
fn line_search<O: ConcaveObjective>(
    obj: &O,
    x: &[f64],
    d: &[f64],
    alpha_max: f64,
    slope0: f64,
) -> Option<Probe> {
    let probe = |alpha: f64, at_max: bool| -> Option<(Probe, f64)> {
        let xa = step_point(x, d, alpha, at_max);
        let (value, grad) = obj.value_and_gradient(&xa)?;
        if !value.is_finite() {
            return None;
        }
        let slope = dot(&grad, d);
        Some((
            Probe {
                alpha,
                value,
                grad,
                x: xa,
            },
            slope,
        ))
    };

    let mut hi_slope: Option<f64> = None;
    let mut hi_probe: Option<Probe> = None;
    match probe(alpha_max, true) {
        Some((p, slope)) if slope >= 0.0 => return Some(p),
        Some((p, slope)) => {
            hi_slope = Some(slope);
            hi_probe = Some(p);
        }
        None => {}
    }

    let mut lo = 0.0;
    let mut lo_slope = slope0;
    let mut lo_probe: Option<Probe> = None;
    let mut hi = alpha_max;
    let mut last_side = 0i8;

    for _ in 0..LINE_SEARCH_MAX_EVALS {
        let width = hi - lo;
        if width <= 1e-15 * alpha_max.max(1e-300) {
            break;
        }
        let trial = match hi_slope {
            Some(hs) => {
                let t = lo + width * lo_slope / (lo_slope - hs);
                if t > lo && t < hi {
                    t
                } else {
                    lo + 0.5 * width
                }
            }
            None => lo + 0.5 * width,
        };
        match probe(trial, false) {
            None => {
                hi = trial;
                hi_slope = None;
                hi_probe = None;
                last_side = 0;
            }
            Some((p, slope)) => {
                if slope.abs() <= 1e-13 * slope0.abs() {
                    return Some(p);
                }
                if slope > 0.0 {
                    lo = trial;
                    lo_slope = slope;
                    lo_probe = Some(p);
                    if last_side == 1 {
                        if let Some(hs) = hi_slope.as_mut() {
                            *hs *= 0.5;
                        }
                    }
                    last_side = 1;
                } else {
                    hi = trial;
                    hi_slope = Some(slope);
                    hi_probe = Some(p);
                    if last_side == -1 {
                        lo_slope *= 0.5;
                    }
                    last_side = -1;
                }
            }
        }
    }

    match (lo_probe, hi_probe) {
        (Some(l), Some(h)) => Some(if h.value > l.value { h } else { l }),
        (Some(l), None) => Some(l),
        (None, Some(h)) => Some(h),
        (None, None) => None,
    }
}

pub(crate) fn maximize<O: ConcaveObjective>(
    obj: &O,
    s: usize,
    x0: Vec<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<FwOutcome> {
    let n = obj.dim();
    debug_assert_eq!(x0.len(), n);
    let (mut value, mut grad) = obj
        .value_and_gradient(&x0)
        .filter(|(v, _)| v.is_finite())
        .ok_or(LinxError::NotPositiveDefinite)?;
    let tol = rel_tol * value.abs().max(1.0);
    let mut x = x0;
    let mut gap = duality_gap(&grad, &x, s);
    let mut iterations = 0;

    while iterations < max_iter {
        if gap <= tol {
            return Ok(FwOutcome {
                x,
                value,
                gap,
                iterations,
                converged: true,
            });
        }
        iterations += 1;

        let v = lmo_capped_simplex(&grad, s);
        let a = away_vertex(&grad, &x, s);
        let mut moved = false;
        for dir in [pairwise(&v, &a), pairwise(&v, &x)] {
            let slope0 = dot(&grad, &dir);
            if slope0 <= 0.0 {
                continue;
            }
            let alpha_max = max_step(&x, &dir);
            if alpha_max <= 0.0 {
                continue;
            }
            if let Some(p) = line_search(obj, &x, &dir, alpha_max, slope0) {
                if p.alpha > 0.0 && p.value >= value {
                    x = p.x;
                    value = p.value;
                    grad = p.grad;
                    moved = true;
                    break;
                }
            }
        }
        gap = duality_gap(&grad, &x, s);
        if !moved {
            // no ascent possible at working precision
            break;
        }
    }
    Ok(FwOutcome {
        converged: gap <= tol,
        x,
        value,
        gap,
        iterations,
    })
}

fn pairwise(to: &[f64], from: &[f64]) -> Vec<f64> {
    to.iter().zip(from).map(|(t, f)| t - f).collect()
}

/// Largest `α` keeping `x + αd` inside `[0,1]^n`.
fn max_step(x: &[f64], d: &[f64]) -> f64 {
    x.iter()
        .zip(d)
        .filter(|(_, &di)| di != 0.0)
        .map(
            |(&xi, &di)| {
                if di > 0.0 {
                    (1.0 - xi) / di
                } else {
                    xi / -di
                }
            },
        )
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}
