//! Proximal-projected gradient descent shared by every estimator.
//!
//! The composite objective is `L(mu, theta) + gamma * ||theta||_1` over the
//! feasibility box (or over all of R^p in unconstrained mode). The prox of the
//! penalty plus the box is a soft-threshold followed by the box projection.
//! Trial steps start from a Barzilai-Borwein estimate and backtrack until the
//! standard sufficient-decrease condition holds, so the objective never rises.

use crate::error::Result;
use crate::likelihood::Objective;
use crate::model::{feasibility, project_feasible_joint, project_with_caps, ConstraintSet};

use super::SolverConfig;

/// Slack below which an inequality of the box counts as active.
const ACTIVE_TOL: f64 = 1e-10;

pub(crate) struct Problem<'a, 'b> {
    pub objective: &'b Objective<'a>,
    pub gamma: f64,
    pub constraints: ConstraintSet,
    pub estimate_baseline: bool,
    /// Coordinates allowed to be nonzero; `None` means all of them.
    pub free: Option<&'b [bool]>,
}

#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub mu: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub point: Point,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
}

struct Evaluated {
    point: Point,
    smooth: f64,
    total: f64,
    grad: Vec<f64>,
    dmu: f64,
}

impl Problem<'_, '_> {
    fn is_free(&self, k: usize) -> bool {
        self.free.is_none_or(|f| f[k])
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        if self.gamma == 0.0 {
            0.0
        } else {
            self.gamma * theta.iter().map(|v| v.abs()).sum::<f64>()
        }
    }

    /// Prox of `step * (gamma ||.||_1 + box indicator)` at `(mu, theta)`.
    fn prox(&self, mu: f64, theta: &[f64], step: f64) -> Point {
        let shrink = step * self.gamma;
        let mut shrunk: Vec<f64> = theta
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if !self.is_free(k) {
                    0.0
                } else if shrink > 0.0 {
                    v.signum() * (v.abs() - shrink).max(0.0)
                } else {
                    v
                }
            })
            .collect();
        if !self.constraints.is_constrained() {
            return Point { mu, theta: shrunk };
        }
        if self.estimate_baseline {
            let (mu, theta) = project_feasible_joint(mu, &shrunk, &self.constraints);
            Point { mu, theta }
        } else {
            shrunk = project_with_caps(
                &shrunk,
                self.constraints.pi_max - mu,
                mu - self.constraints.pi_min,
            );
            Point { mu, theta: shrunk }
        }
    }

    fn evaluate(&self, point: Point) -> Result<Evaluated> {
        let mut grad = vec![0.0; point.theta.len()];
        let (smooth, dmu) = self
            .objective
            .value_and_gradient(point.mu, &point.theta, &mut grad)?;
        for (k, g) in grad.iter_mut().enumerate() {
            if !self.is_free(k) {
                *g = 0.0;
            }
        }
        let dmu = if self.estimate_baseline { dmu } else { 0.0 };
        let total = smooth + self.penalty(&point.theta);
        Ok(Evaluated {
            point,
            smooth,
            total,
            grad,
            dmu,
        })
    }

    /// l-infinity distance of `-grad` from `gamma * d||theta||_1` plus the
    /// normal cone of the box at the current point.
    pub(crate) fn kkt_residual(&self, point: &Point, grad: &[f64], dmu: f64) -> f64 {
        let gamma = self.gamma;
        // For the upper inequality the multiplier `a` must match
        // c_k = -g_k - gamma on positive coordinates and dominate it on zero
        // coordinates; the lower inequality mirrors this with e_k = g_k - gamma.
        let mut up = Shift::default();
        let mut down = Shift::default();
        let mut fixed = 0.0f64;
        for (k, (&v, &g)) in point.theta.iter().zip(grad).enumerate() {
            if !self.is_free(k) {
                continue;
            }
            let c = -g - gamma;
            let e = g - gamma;
            if v > 0.0 {
                up.exact(c);
            } else if v < 0.0 {
                down.exact(e);
            } else {
                up.dominate(c);
                down.dominate(e);
            }
        }
        if !self.constraints.is_constrained() {
            fixed = fixed.max(up.at(0.0)).max(down.at(0.0));
            if self.estimate_baseline {
                fixed = fixed.max(dmu.abs());
            }
            return fixed;
        }
        let report = feasibility(point.mu, &point.theta, &self.constraints);
        let up_active = report.upper_slack <= ACTIVE_TOL;
        let down_active = report.lower_slack <= ACTIVE_TOL;

        if !self.estimate_baseline {
            let a = if up_active { up.best() } else { up.at(0.0) };
            let b = if down_active { down.best() } else { down.at(0.0) };
            return a.max(b);
        }

        // The baseline row couples the two multipliers: -dmu = a - b.
        let a_max = if up_active { up.scale() + dmu.abs() + 1.0 } else { 0.0 };
        let b_max = if down_active { down.scale() + dmu.abs() + 1.0 } else { 0.0 };
        let inner = |a: f64| {
            ternary_min(0.0, b_max, |b| {
                up.at(a).max(down.at(b)).max((dmu + a - b).abs())
            })
        };
        ternary_min(0.0, a_max, inner)
    }

    pub(crate) fn solve(&self, start: Point, cfg: &SolverConfig) -> Result<Solution> {
        let start = self.prox(start.mu, &start.theta, 0.0);
        let mut cur = self.evaluate(start)?;
        let mut trace = vec![cur.total];
        let mut kkt = self.kkt_residual(&cur.point, &cur.grad, cur.dmu);
        let mut converged = kkt < cfg.kkt_tol;
        let mut step = cfg.step_init;
        let mut iterations = 0;
        let mut prev_for_momentum: Option<Point> = None;
        let mut momentum = 1.0f64;

        while !converged && iterations < cfg.max_iters {
            iterations += 1;

            // Optional Nesterov extrapolation, discarded whenever it fails to
            // improve on the current iterate.
            let base = match (&prev_for_momentum, cfg.accelerate) {
                (Some(prev), true) => {
                    let next_m = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                    let beta = (momentum - 1.0) / next_m;
                    momentum = next_m;
                    let y = Point {
                        mu: cur.point.mu + beta * (cur.point.mu - prev.mu),
                        theta: cur
                            .point
                            .theta
                            .iter()
                            .zip(&prev.theta)
                            .map(|(a, b)| a + beta * (a - b))
                            .collect(),
                    };
                    let y = self.prox(y.mu, &y.theta, 0.0);
                    Some(self.evaluate(y)?)
                }
                _ => None,
            };
            let from = base.as_ref().unwrap_or(&cur);

            let mut accepted = None;
            let mut trial_step = step;
            while trial_step > 1e-30 {
                let mu_in = if self.estimate_baseline {
                    from.point.mu - trial_step * from.dmu
                } else {
                    from.point.mu
                };
                let theta_in: Vec<f64> = from
                    .point
                    .theta
                    .iter()
                    .zip(&from.grad)
                    .map(|(v, g)| v - trial_step * g)
                    .collect();
                let cand = self.prox(mu_in, &theta_in, trial_step);
                let d_mu = cand.mu - from.point.mu;
                let mut lin = from.dmu * d_mu;
                let mut sq = d_mu * d_mu;
                for ((a, b), g) in cand.theta.iter().zip(&from.point.theta).zip(&from.grad) {
                    let d = a - b;
                    lin += g * d;
                    sq += d * d;
                }
                let eval = match self.evaluate(cand) {
                    Ok(e) => e,
                    Err(_) => {
                        trial_step *= cfg.backtrack;
                        continue;
                    }
                };
                let bound = from.smooth + lin + sq / (2.0 * trial_step);
                let slack = 1e-15 * from.smooth.abs().max(1.0);
                if eval.smooth <= bound + slack && eval.total <= from.total {
                    accepted = Some((eval, sq));
                    break;
                }
                trial_step *= cfg.backtrack;
            }

            let Some((next, _)) = accepted else {
                // no descent possible at any step size
                if base.is_some() {
                    prev_for_momentum = None;
                    momentum = 1.0;
                    continue;
                }
                break;
            };

            if base.is_some() && next.total > cur.total {
                prev_for_momentum = None;
                momentum = 1.0;
                continue;
            }

            // Barzilai-Borwein estimate for the next trial step.
            let mut ss = 0.0;
            let mut sy = 0.0;
            let s_mu = next.point.mu - from.point.mu;
            let y_mu = next.dmu - from.dmu;
            ss += s_mu * s_mu;
            sy += s_mu * y_mu;
            for k in 0..next.grad.len() {
                let s = next.point.theta[k] - from.point.theta[k];
                let y = next.grad[k] - from.grad[k];
                ss += s * s;
                sy += s * y;
            }
            step = if sy > 0.0 && ss > 0.0 {
                (ss / sy).clamp(1e-12, 1e12)
            } else {
                (trial_step / cfg.backtrack).min(1e12)
            };

            let rel_change = (cur.total - next.total).abs() / cur.total.abs().max(f64::MIN_POSITIVE);
            if cfg.accelerate {
                prev_for_momentum = Some(cur.point.clone());
            }
            cur = next;
            trace.push(cur.total);
            kkt = self.kkt_residual(&cur.point, &cur.grad, cur.dmu);
            if kkt < cfg.kkt_tol || rel_change < cfg.tol {
                converged = true;
            }
        }

        Ok(Solution {
            objective: cur.total,
            point: cur.point,
            iterations,
            kkt_residual: kkt,
            converged,
            trace,
        })
    }
}

/// Best value of `max(U - a, a - L, 0)` over the admissible multipliers,
/// where `U` collects hinge and exact terms and `L` only exact ones.
#[derive(Debug, Clone, Copy)]
struct Shift {
    upper: f64,
    lower: f64,
}

impl Default for Shift {
    fn default() -> Self {
        Self {
            upper: f64::NEG_INFINITY,
            lower: f64::INFINITY,
        }
    }
}

impl Shift {
    /// Term `|c - a|`.
    fn exact(&mut self, c: f64) {
        self.upper = self.upper.max(c);
        self.lower = self.lower.min(c);
    }

    /// Term `max(c - a, 0)`.
    fn dominate(&mut self, c: f64) {
        self.upper = self.upper.max(c);
    }

    fn at(&self, a: f64) -> f64 {
        (self.upper - a).max(a - self.lower).max(0.0)
    }

    /// Minimum over `a >= 0`.
    fn best(&self) -> f64 {
        let a = if self.lower.is_finite() && self.upper.is_finite() {
            0.5 * (self.upper + self.lower)
        } else if self.upper.is_finite() {
            self.upper
        } else {
            0.0
        };
        self.at(a.max(0.0))
    }

    fn scale(&self) -> f64 {
        let mut s: f64 = 0.0;
        if self.upper.is_finite() {
            s = s.max(self.upper.abs());
        }
        if self.lower.is_finite() {
            s = s.max(self.lower.abs());
        }
        2.0 * s
    }
}

fn ternary_min(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    if hi <= lo {
        return f(lo);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..120 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    f(0.5 * (a + b)).min(f(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_minimizes_piecewise_linear_max() {
        let mut s = Shift::default();
        s.exact(0.3);
        s.exact(0.1);
        s.dominate(0.25);
        // best a = 0.2, value 0.1
        assert!((s.best() - 0.1).abs() < 1e-15);
        let mut h = Shift::default();
        h.dominate(-0.2);
        assert_eq!(h.best(), 0.0);
        h.dominate(0.4);
        assert_eq!(h.best(), 0.0);
        assert!((h.at(0.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn ternary_finds_kink() {
        let v = ternary_min(0.0, 3.0, |x| (x - 1.234).abs() + 0.5);
        assert!((v - 0.5).abs() < 1e-12);
    }
}
