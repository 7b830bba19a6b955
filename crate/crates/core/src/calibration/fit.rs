//! Nonlinear least squares for `y = k1 / (k2 + x) + k3`.
//!
//! The model is linear in `k1` and `k3` but not in `k2`, and `k2` may take
//! either sign, so the solver is a Levenberg–Marquardt iteration run from
//! several starting values of `k2`. Iterates that would put the pole
//! `x = -k2` on or between the fitted abscissae are rejected.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 1000;
/// Relative pole clearance `|k2 + x| >= POLE_EPS * max|x|`.
const POLE_EPS: f64 = 1e-3;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResult {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Sum of squared residuals over the fitted points.
    pub sse: f64,
    /// Mean absolute percentage error over the fitted points; NaN when a target is zero.
    pub mape_percent: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn model(p: &Vector3<f64>, x: f64) -> f64 {
    p[0] / (p[1] + x) + p[2]
}

fn sse(p: &Vector3<f64>, points: &[(f64, f64)]) -> f64 {
    points.iter().map(|&(x, y)| (y - model(p, x)).powi(2)).sum()
}

struct PoleGuard {
    lo: f64,
    hi: f64,
    clearance: f64,
}

impl PoleGuard {
    fn new(points: &[(f64, f64)]) -> Self {
        let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let scale = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(1.0);
        PoleGuard { lo, hi, clearance: POLE_EPS * scale }
    }

    fn admits(&self, k2: f64) -> bool {
        let pole = -k2;
        k2.is_finite() && (pole < self.lo - self.clearance || pole > self.hi + self.clearance)
    }
}

struct Descent {
    params: Vector3<f64>,
    sse: f64,
    converged: bool,
    iterations: usize,
}

fn levenberg_marquardt(points: &[(f64, f64)], start: Vector3<f64>, guard: &PoleGuard) -> Descent {
    let mut p = start;
    let mut cost = sse(&p, points);
    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for &(x, y) in points {
            let inv = 1.0 / (p[1] + x);
            let jac = Vector3::new(inv, -p[0] * inv * inv, 1.0);
            let r = y - model(&p, x);
            jtj += jac * jac.transpose();
            jtr += jac * r;
        }
        let floor = 1e-12 * jtj.diagonal().max();

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(floor);
            }
            let step = damped.lu().solve(&jtr);
            match step {
                Some(step) if guard.admits(p[1] + step[1]) => {
                    let trial = p + step;
                    let trial_cost = sse(&trial, points);
                    if trial_cost.is_finite() && trial_cost < cost {
                        let small_gain = cost - trial_cost <= 1e-15 * cost;
                        let small_step = step.iter().zip(p.iter()).all(|(d, v)| d.abs() <= 1e-13 * (v.abs() + 1e-300));
                        p = trial;
                        cost = trial_cost;
                        lambda = (lambda / 10.0).max(1e-15);
                        accepted = true;
                        converged = small_gain || small_step;
                        break;
                    }
                    lambda *= 10.0;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // No step of any length lowers the cost: a minimum to working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Descent { params: p, sse: cost, converged, iterations }
}

fn check_points(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if points.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(Error::InvalidArgument("fit points must be finite".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateX(w[0].0));
    }
    if sorted.len() < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: sorted.len() });
    }
    Ok(sorted)
}

fn finish(points: &[(f64, f64)], k1: f64, k2: f64, k3: f64, sse: f64, converged: bool, iterations: usize) -> FitResult {
    let mut fit = FitResult { k1, k2, k3, sse, mape_percent: f64::NAN, converged, iterations };
    fit.mape_percent = mape(&fit, points).unwrap_or(f64::NAN);
    fit
}

/// Fits `gScale = k1 / (k2 + nConn) + k3` to `(nConn, gScale)` points.
///
/// Needs at least four points with distinct x. Constant data returns
/// `k1 = 0`, `k3 = mean(y)` and `k2 = 0` (or `1 - min(x)` if that would put
/// the pole on the data). A start that fails to converge still yields its
/// best parameters with `converged = false`.
pub fn fit_gscale(points: &[(f64, f64)]) -> Result<FitResult> {
    let points = check_points(points)?;
    let n = points.len() as f64;
    let min_x = points[0].0;
    let max_x = points[points.len() - 1].0;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let min_y = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let guard = PoleGuard::new(&points);

    if points.iter().all(|p| p.1 == points[0].1) {
        let k2 = if guard.admits(0.0) { 0.0 } else { 1.0 - min_x };
        return Ok(finish(&points, 0.0, k2, mean_y, 0.0, true, 0));
    }

    let (x1, y1) = points[0];
    let starts = [-min_x / 2.0, 0.0, mean_x, 10.0 * max_x];
    let mut best: Option<Descent> = None;
    for k2 in starts {
        if !guard.admits(k2) {
            continue;
        }
        let k3 = min_y;
        let k1 = (y1 - k3) * (x1 + k2);
        let d = levenberg_marquardt(&points, Vector3::new(k1, k2, k3), &guard);
        let better = match &best {
            None => true,
            Some(b) => d.sse < b.sse || (d.sse == b.sse && d.converged && !b.converged),
        };
        if better {
            best = Some(d);
        }
    }
    // A start right of every abscissa always clears the guard.
    let d = match best {
        Some(d) => d,
        None => {
            let k2 = 1.0 - min_x + max_x.abs();
            let k1 = (y1 - min_y) * (x1 + k2);
            levenberg_marquardt(&points, Vector3::new(k1, k2, min_y), &guard)
        }
    };
    Ok(finish(&points, d.params[0], d.params[1], d.params[2], d.sse, d.converged, d.iterations))
}

/// `k1 / (k2 + nConn) + k3`.
pub fn predict(fit: &FitResult, n_conn: f64) -> Result<f64> {
    let denom = fit.k2 + n_conn;
    if denom == 0.0 {
        return Err(Error::Pole(n_conn));
    }
    Ok(fit.k1 / denom + fit.k3)
}

/// Mean absolute percentage error of the fitted curve over `points`.
pub fn mape(fit: &FitResult, points: &[(f64, f64)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let mut total = 0.0;
    for &(x, y) in points {
        if y == 0.0 {
            return Err(Error::ZeroTarget(x));
        }
        total += ((y - predict(fit, x)?) / y).abs();
    }
    Ok(100.0 * total / points.len() as f64)
}
