//! L-BFGS with a strong-Wolfe line search (cubic interpolation zoom).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::OptimizeError;

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 25;
const MAX_ZOOM: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsSettings {
    pub history: usize,
    pub max_iterations: usize,
    /// Stop when the gradient 2-norm falls below this.
    pub grad_tol: f64,
    /// Stop when `|f_prev - f| <= rel_tol * max(|f_prev|, |f|)`.
    pub rel_tol: f64,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            history: 50,
            max_iterations: 5000,
            grad_tol: 1e-8,
            rel_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LbfgsStop {
    GradientNorm,
    RelativeChange,
    MaxIterations,
    /// No step satisfying the Wolfe conditions was found; the result is the best point seen.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsReport {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: LbfgsStop,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Probe {
    alpha: f64,
    f: f64,
    d: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Minimises `objective`, which returns the value and gradient at a point.
///
/// `observer` is called after every accepted iteration with the iteration
/// count (from 1), the new point and its value.
pub fn lbfgs_minimize<F, O>(
    mut objective: F,
    x0: &[f64],
    settings: &LbfgsSettings,
    mut observer: O,
) -> Result<LbfgsReport, OptimizeError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), OptimizeError>,
    O: FnMut(usize, &[f64], f64),
{
    let mut evaluations = 1;
    let mut x = x0.to_vec();
    let (mut f, mut g) = objective(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(OptimizeError::NonFiniteStart);
    }
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.history);
    let report = |x: Vec<f64>, f, iterations, evaluations, stop| LbfgsReport {
        x,
        f,
        iterations,
        evaluations,
        stop,
    };
    if norm(&g) < settings.grad_tol {
        return Ok(report(x, f, 0, evaluations, LbfgsStop::GradientNorm));
    }

    for it in 1..=settings.max_iterations {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = hist.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut d0 = dot(&g, &dir);
        if !(d0 < 0.0) {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            d0 = dot(&g, &dir);
        }
        let alpha0 = if hist.is_empty() { (1.0 / norm(&g)).min(1.0) } else { 1.0 };

        let mut phi = |alpha: f64| -> Result<Probe, OptimizeError> {
            let xa: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
            let (fa, ga) = objective(&xa)?;
            evaluations += 1;
            let da = dot(&ga, &dir);
            let ok = fa.is_finite() && da.is_finite();
            Ok(Probe {
                alpha,
                f: if ok { fa } else { f64::INFINITY },
                d: if ok { da } else { f64::NAN },
                x: xa,
                g: ga,
            })
        };
        let Some(step) = strong_wolfe(&mut phi, f, d0, alpha0)? else {
            return Ok(report(x, f, it - 1, evaluations, LbfgsStop::LineSearchFailed));
        };

        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if hist.len() == settings.history {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let f_prev = f;
        x = step.x;
        f = step.f;
        g = step.g;
        observer(it, &x, f);
        if norm(&g) < settings.grad_tol {
            return Ok(report(x, f, it, evaluations, LbfgsStop::GradientNorm));
        }
        if (f_prev - f).abs() <= settings.rel_tol * f_prev.abs().max(f.abs()) {
            return Ok(report(x, f, it, evaluations, LbfgsStop::RelativeChange));
        }
    }
    Ok(report(x, f, settings.max_iterations, evaluations, LbfgsStop::MaxIterations))
}

fn strong_wolfe<P>(phi: &mut P, f0: f64, d0: f64, alpha1: f64) -> Result<Option<Probe>, OptimizeError>
where
    P: FnMut(f64) -> Result<Probe, OptimizeError>,
{
    let mut prev = Probe {
        alpha: 0.0,
        f: f0,
        d: d0,
        x: Vec::new(),
        g: Vec::new(),
    };
    let mut alpha = alpha1;
    for i in 0..MAX_BRACKET {
        let cur = phi(alpha)?;
        if cur.f > f0 + C1 * alpha * d0 || (i > 0 && cur.f >= prev.f) {
            return zoom(phi, f0, d0, prev, cur);
        }
        if cur.d.abs() <= -C2 * d0 {
            return Ok(Some(cur));
        }
        if cur.d >= 0.0 {
            return zoom(phi, f0, d0, cur, prev);
        }
        alpha *= 2.0;
        prev = cur;
    }
    Ok(None)
}

/// Sufficient-decrease bracket `[lo, hi]` refinement; `lo` always satisfies
/// the decrease condition.
fn zoom<P>(phi: &mut P, f0: f64, d0: f64, mut lo: Probe, mut hi: Probe) -> Result<Option<Probe>, OptimizeError>
where
    P: FnMut(f64) -> Result<Probe, OptimizeError>,
{
    for _ in 0..MAX_ZOOM {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= 1e-16 * b.max(1e-300) {
            break;
        }
        let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (a + b));
        if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
            alpha = 0.5 * (a + b);
        }
        let cur = phi(alpha)?;
        if cur.f > f0 + C1 * alpha * d0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.d.abs() <= -C2 * d0 {
                return Ok(Some(cur));
            }
            if cur.d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // Fall back to the best decrease point if it moved at all.
    Ok(if lo.alpha > 0.0 && lo.f < f0 { Some(lo) } else { None })
}

/// Minimiser of the cubic interpolating values and slopes at two probes.
fn cubic_min(p: &Probe, q: &Probe) -> Option<f64> {
    if !(p.f.is_finite() && q.f.is_finite() && p.d.is_finite() && q.d.is_finite()) {
        return None;
    }
    let d1 = p.d + q.d - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.d * q.d;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let t = q.alpha - (q.alpha - p.alpha) * (q.d + d2 - d1) / (q.d - p.d + 2.0 * d2);
    t.is_finite().then_some(t)
}
