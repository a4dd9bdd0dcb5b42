//! Projected BFGS for smooth minimization under box constraints.
//!
//! Coordinates at a bound whose gradient points outward are held fixed for
//! the iteration; the remaining ones take a quasi-Newton step, and every
//! trial point is projected back into the box, so the objective is never
//! evaluated outside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stopping and line-search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub max_iter: usize,
    /// Stop when the projected gradient's largest entry falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step changes the objective by less than this,
    /// relative to `max(|f|, 1)`.
    pub f_rel_tol: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-7,
            f_rel_tol: 1e-12,
        }
    }
}

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Success,
    MaxIter,
    LineSearchFailure,
    SingularHessian,
}

impl Convergence {
    pub fn label(self) -> &'static str {
        match self {
            Convergence::Success => "success",
            Convergence::MaxIter => "max_iter",
            Convergence::LineSearchFailure => "line_search_failure",
            Convergence::SingularHessian => "singular_hessian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub convergence: Convergence,
    /// Objective value after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;

/// Minimizes `f` over `lower ≤ x ≤ upper`. The objective returns the value
/// and gradient, or `None` where it cannot be evaluated (treated as `+∞`).
pub fn minimize_box<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &OptimConfig,
) -> Result<OptimOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::Optimizer("bound lengths do not match the start".into()));
    }
    if (0..n).any(|i| !(lower[i] <= upper[i])) {
        return Err(Error::Optimizer("lower bound exceeds upper bound".into()));
    }
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };

    let mut x = x0.to_vec();
    project(&mut x);
    let mut evaluations = 1;
    let (mut fx, mut g) = match f(&x) {
        Some((v, g)) if v.is_finite() && g.iter().all(|x| x.is_finite()) => (v, g),
        _ => return Err(Error::Optimizer("objective is not finite at the start".into())),
    };
    let mut trace = vec![fx];
    let mut h = identity(n);
    let mut h_is_identity = true;

    for iter in 0..cfg.max_iter {
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lo = x[i] <= lower[i] && g[i] > 0.0;
                let at_hi = x[i] >= upper[i] && g[i] < 0.0;
                !(at_lo || at_hi) && lower[i] < upper[i]
            })
            .collect();
        let pg_norm = (0..n).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg_norm < cfg.grad_tol {
            return Ok(done(x, fx, g, iter, evaluations, Convergence::Success, trace));
        }

        let mut retried = false;
        loop {
            let mut d = vec![0.0; n];
            for i in (0..n).filter(|&i| free[i]) {
                d[i] = -(0..n).filter(|&j| free[j]).map(|j| h[i][j] * g[j]).sum::<f64>();
            }
            let slope: f64 = (0..n).map(|i| d[i] * g[i]).sum();
            if !(slope < 0.0) {
                h = identity(n);
                h_is_identity = true;
                for i in 0..n {
                    d[i] = if free[i] { -g[i] } else { 0.0 };
                }
            }
            let d_max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut step = if h_is_identity { (1.0 / d_max).min(1.0) } else { 1.0 };

            let mut accepted = None;
            for _ in 0..MAX_BACKTRACK {
                let mut xn: Vec<f64> = (0..n).map(|i| x[i] + step * d[i]).collect();
                project(&mut xn);
                let decrease: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
                if decrease == 0.0 && xn == x {
                    break;
                }
                evaluations += 1;
                if let Some((fv, gv)) = f(&xn) {
                    let ok = fv.is_finite() && gv.iter().all(|v| v.is_finite());
                    if ok && fv <= fx + ARMIJO * decrease {
                        accepted = Some((xn, fv, gv));
                        break;
                    }
                }
                step *= 0.5;
            }

            match accepted {
                Some((xn, fv, gv)) => {
                    let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                    let y: Vec<f64> = (0..n).map(|i| gv[i] - g[i]).collect();
                    let change = (fx - fv).abs();
                    let scale = fx.abs().max(1.0);
                    x = xn;
                    fx = fv;
                    g = gv;
                    trace.push(fx);
                    if bfgs_update(&mut h, &s, &y, h_is_identity) {
                        h_is_identity = false;
                    }
                    if change <= cfg.f_rel_tol * scale {
                        return Ok(done(x, fx, g, iter + 1, evaluations, Convergence::Success, trace));
                    }
                    break;
                }
                None if !retried && !h_is_identity => {
                    h = identity(n);
                    h_is_identity = true;
                    retried = true;
                }
                None => {
                    return Ok(done(
                        x,
                        fx,
                        g,
                        iter,
                        evaluations,
                        Convergence::LineSearchFailure,
                        trace,
                    ));
                }
            }
        }
    }
    Ok(done(x, fx, g, cfg.max_iter, evaluations, Convergence::MaxIter, trace))
}

fn done(
    x: Vec<f64>,
    f: f64,
    grad: Vec<f64>,
    iterations: usize,
    evaluations: usize,
    convergence: Convergence,
    trace: Vec<f64>,
) -> OptimOutcome {
    OptimOutcome {
        x,
        f,
        grad,
        iterations,
        evaluations,
        convergence,
        trace,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Inverse-Hessian BFGS update; skipped when the curvature condition fails.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], rescale: bool) -> bool {
    let n = s.len();
    let sy: f64 = (0..n).map(|i| s[i] * y[i]).sum();
    let yy: f64 = (0..n).map(|i| y[i] * y[i]).sum();
    let ss: f64 = (0..n).map(|i| s[i] * s[i]).sum();
    if !(sy > 1e-12 * (ss * yy).sqrt()) {
        return false;
    }
    if rescale {
        let gamma = sy / yy;
        for (i, row) in h.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { gamma } else { 0.0 };
            }
        }
    }
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = (0..n).map(|i| y[i] * hy[i]).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
    true
}
