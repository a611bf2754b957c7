//! Maximization of a concave function over a Euclidean ball.
//!
//! Each iteration maximizes the local quadratic model over the ball (a
//! trust-region subproblem solved exactly through an eigendecomposition)
//! and backtracks along the resulting feasible segment with an Armijo
//! test. The ball is convex, so every trial point stays feasible.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::likelihood::ConcaveObjective;
use crate::error::{invalid, Result};
use crate::linalg::{distance, dot, norm, project_to_ball, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Absolute projected-gradient tolerance.
    pub tolerance: f64,
    /// Tolerance relative to the objective's gradient scale; the larger of
    /// the two applies.
    pub relative_tolerance: f64,
    pub armijo: f64,
    pub shrink: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-8,
            relative_tolerance: 1e-13,
            armijo: 1e-4,
            shrink: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid("solver needs at least one iteration"));
        }
        if !(self.tolerance > 0.0 && self.relative_tolerance >= 0.0) {
            return Err(invalid("solver tolerances must be positive"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0 && self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid("line-search constants must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub estimate: Vec<f64>,
    pub loglik: f64,
    /// Norm of the projected gradient step `w - P(w + g)` at the estimate.
    pub grad_norm: f64,
    /// Tolerance the gradient norm was compared against.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The estimate sits on the ball's boundary.
    pub active_constraint: bool,
    /// Iteration stopped because the remaining ascent fell below the
    /// objective's rounding error, before the gradient test passed.
    pub precision_limited: bool,
}

impl EstimationReport {
    /// Whether the estimate is as good as floating point allows.
    pub fn usable(&self) -> bool {
        self.converged || self.precision_limited
    }
}

/// Maximizes over `{ |w| <= radius }` starting from the origin.
pub fn global_mle<O: ConcaveObjective>(
    obj: &O,
    radius: f64,
    cfg: &SolverConfig,
) -> Result<EstimationReport> {
    let zero = vec![0.0; obj.dim()];
    maximize_in_ball(obj, &zero, radius, &zero, cfg)
}

/// Maximizes over `{ |w - center| <= radius }`, warm-started at `start`
/// (projected into the ball) or at the center.
pub fn local_mle<O: ConcaveObjective>(
    obj: &O,
    center: &[f64],
    radius: f64,
    start: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<EstimationReport> {
    maximize_in_ball(obj, center, radius, start.unwrap_or(center), cfg)
}

fn projected_gradient_norm(w: &[f64], g: &[f64], center: &[f64], radius: f64) -> f64 {
    let mut y: Vec<f64> = w.iter().zip(g).map(|(a, b)| a + b).collect();
    project_to_ball(&mut y, center, radius);
    distance(w, &y)
}

fn on_boundary(w: &[f64], center: &[f64], radius: f64) -> bool {
    distance(w, center) >= radius * (1.0 - 1e-9)
}

pub fn maximize_in_ball<O: ConcaveObjective>(
    obj: &O,
    center: &[f64],
    radius: f64,
    start: &[f64],
    cfg: &SolverConfig,
) -> Result<EstimationReport> {
    cfg.validate()?;
    let d = obj.dim();
    if center.len() != d || start.len() != d {
        return Err(invalid(format!(
            "objective has dimension {d}, center {} and start {}",
            center.len(),
            start.len()
        )));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(invalid(format!(
            "ball radius must be finite and nonnegative, got {radius}"
        )));
    }

    let mut w = start.to_vec();
    project_to_ball(&mut w, center, radius);
    let mut f = obj.value(&w);
    if !f.is_finite() {
        return Err(invalid("objective is not finite at the starting point"));
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut precision_limited = false;
    let (mut pg, mut tol);

    loop {
        let g = obj.gradient(&w);
        pg = projected_gradient_norm(&w, &g, center, radius);
        tol = cfg
            .tolerance
            .max(cfg.relative_tolerance * obj.gradient_scale(&w));
        if radius == 0.0 || pg <= tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iterations {
            break;
        }
        iterations += 1;

        let h = obj.curvature(&w);
        let s0: Vec<f64> = w.iter().zip(center).map(|(a, c)| a - c).collect();
        let s = ball_model_step(&h, &g, &s0, radius);
        let mut dir: Vec<f64> = s.iter().zip(&s0).map(|(a, b)| a - b).collect();
        let mut slope = dot(&g, &dir);
        if !(slope > 0.0) {
            // Degenerate model; fall back to a projected gradient step.
            let step = radius / norm(&g).max(f64::MIN_POSITIVE);
            let mut y: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            project_to_ball(&mut y, center, radius);
            dir = y.iter().zip(&w).map(|(a, b)| a - b).collect();
            slope = dot(&g, &dir);
            if !(slope > 0.0) {
                break;
            }
        }
        let predicted = slope - 0.5 * h.quad_form(&dir);
        if predicted <= 4.0 * f64::EPSILON * f.abs().max(1.0) {
            // Remaining ascent is below what the objective can resolve.
            precision_limited = true;
            break;
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut stalled = false;
        while alpha > 1e-20 {
            let trial: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
            let ft = obj.value(&trial);
            if ft.is_finite() && ft >= f + cfg.armijo * alpha * slope {
                // The Armijo margin can round away; an accepted step that
                // does not raise the objective means rounding noise has
                // swamped the remaining ascent.
                stalled = !(ft > f);
                if !stalled {
                    w = trial;
                    project_to_ball(&mut w, center, radius);
                    f = obj.value(&w);
                }
                accepted = true;
                break;
            }
            alpha *= cfg.shrink;
        }
        if stalled {
            precision_limited = true;
            break;
        }
        if !accepted {
            break;
        }
    }

    let active_constraint = on_boundary(&w, center, radius);
    Ok(EstimationReport {
        converged: converged || (precision_limited && active_constraint),
        precision_limited,
        active_constraint,
        estimate: w,
        loglik: f,
        grad_norm: pg,
        tolerance: tol,
        iterations,
    })
}

/// Maximizer of `g^T (s - s0) - (s - s0)^T H (s - s0) / 2` over `|s| <= r`
/// for PSD `H`: solves `(H + mu I) s = g + H s0` with the smallest `mu >= 0`
/// that keeps `s` in the ball.
fn ball_model_step(h: &SymMatrix, g: &[f64], s0: &[f64], r: f64) -> Vec<f64> {
    let d = g.len();
    let hs0 = h.mul_vec(s0);
    let b: Vec<f64> = g.iter().zip(&hs0).map(|(a, c)| a + c).collect();
    let eig = h.eigen();
    let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let floor = 1e-14 * top;
    let lam: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| if l > floor { l } else { 0.0 })
        .collect();
    let beta: Vec<f64> = eig.vectors.iter().map(|q| dot(q, &b)).collect();

    let coeffs = |mu: f64| -> Vec<f64> {
        lam.iter()
            .zip(&beta)
            .map(|(&l, &bt)| {
                let den = l + mu;
                if den > 0.0 {
                    bt / den
                } else {
                    0.0
                }
            })
            .collect()
    };
    let radius_of = |c: &[f64]| norm(c);

    let singular_hit = lam
        .iter()
        .zip(&beta)
        .any(|(&l, &bt)| l == 0.0 && bt.abs() > 1e-14 * norm(&b).max(f64::MIN_POSITIVE));
    let mut c = coeffs(0.0);
    if singular_hit || radius_of(&c) > r {
        let mut lo = 0.0_f64;
        let mut hi = norm(&b) / r;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if radius_of(&coeffs(mid)) > r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c = coeffs(hi);
    }

    let mut s = vec![0.0; d];
    for (ck, q) in c.iter().zip(&eig.vectors) {
        for (si, qi) in s.iter_mut().zip(q) {
            *si += ck * qi;
        }
    }
    let zero = vec![0.0; d];
    project_to_ball(&mut s, &zero, r);
    s
}
