use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::likelihood::rsc_remainder;
use crate::model::{best_s_term, feasibility, ConstraintSet, GlmParameters, SpikeTrain};

/// Euclidean length of a probe before it is shrunk to stay feasible.
pub const PROBE_RADIUS: f64 = 0.05;

const MAX_ATTEMPTS_PER_PROBE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscReport {
    pub probes: usize,
    /// Smallest `remainder / ||psi||^2` over the probes.
    pub kappa_hat: f64,
    /// Smallest `quadratic_floor / ||psi||^2` over the probes.
    pub floor_kappa: f64,
    /// Smallest `remainder / quadratic_floor`.
    pub min_floor_ratio: f64,
    /// Fraction of probes with `remainder >= quadratic_floor`.
    pub floor_pass_fraction: f64,
}

/// Random perturbations in the cone
/// `||psi_{S^c}||_1 <= 3 ||psi_S||_1 + 4 ||theta_{S^c}||_1`, where `S` holds
/// the `s` largest entries of theta, each shrunk so that `theta + psi` stays
/// inside the feasibility box.
pub fn rsc_probe(
    params: &GlmParameters,
    train: &SpikeTrain,
    constraints: &ConstraintSet,
    num_probes: usize,
    s: usize,
    seed: u64,
) -> Result<RscReport> {
    if num_probes == 0 {
        return invalid("need at least one probe");
    }
    let p = params.p();
    if s == 0 || s > p {
        return invalid("support size must lie in 1..=p");
    }
    if constraints.is_constrained() && !feasibility(params.mu, &params.theta, constraints).feasible {
        return Err(Error::InfeasiblePerturbation);
    }
    let (kept, profile) = best_s_term(&params.theta, s)?;
    let mut on_support: Vec<usize> = kept.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
    // a kernel with fewer than s nonzeros still gets an s-element support
    for i in 0..p {
        if on_support.len() >= s {
            break;
        }
        if !on_support.contains(&i) {
            on_support.push(i);
        }
    }
    let mut in_s = vec![false; p];
    for &i in &on_support {
        in_s[i] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RscReport {
        probes: 0,
        kappa_hat: f64::INFINITY,
        floor_kappa: f64::INFINITY,
        min_floor_ratio: f64::INFINITY,
        floor_pass_fraction: 0.0,
    };
    let mut passes = 0;
    for _ in 0..num_probes {
        let psi = (0..MAX_ATTEMPTS_PER_PROBE)
            .find_map(|_| draw_probe(params, constraints, &in_s, profile.sigma_s, &mut rng))
            .ok_or(Error::DegenerateGeometry)?;
        let r = rsc_remainder(&psi, params, train, constraints)?;
        let norm2: f64 = psi.iter().map(|v| v * v).sum();
        report.kappa_hat = report.kappa_hat.min(r.remainder / norm2);
        report.floor_kappa = report.floor_kappa.min(r.quadratic_floor / norm2);
        if r.quadratic_floor > 0.0 {
            report.min_floor_ratio = report.min_floor_ratio.min(r.remainder / r.quadratic_floor);
        }
        if r.remainder >= r.quadratic_floor {
            passes += 1;
        }
        report.probes += 1;
    }
    report.floor_pass_fraction = passes as f64 / report.probes as f64;
    Ok(report)
}

fn draw_probe<R: Rng>(
    params: &GlmParameters,
    constraints: &ConstraintSet,
    in_s: &[bool],
    sigma_s: f64,
    rng: &mut R,
) -> Option<Vec<f64>> {
    let p = in_s.len();
    let mut psi = vec![0.0f64; p];
    for (v, &inside) in psi.iter_mut().zip(in_s) {
        if inside {
            *v = rng.random_range(-1.0..=1.0);
        }
    }
    let on: f64 = psi.iter().map(|v| v.abs()).sum();
    let off_budget = rng.random_range(0.0..=1.0) * (3.0 * on + 4.0 * sigma_s);
    if in_s.iter().any(|b| !b) && off_budget > 0.0 {
        // a random handful of off-support lags shares the budget
        let count = rng.random_range(1..=p.min(10));
        let mut raw = vec![0.0; p];
        for _ in 0..count {
            let i = rng.random_range(0..p);
            if !in_s[i] {
                raw[i] = rng.random_range(-1.0..=1.0);
            }
        }
        let mass: f64 = raw.iter().map(|v: &f64| v.abs()).sum();
        if mass > 0.0 {
            for (v, r) in psi.iter_mut().zip(&raw) {
                *v += r * off_budget / mass;
            }
        }
    }
    let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    for v in &mut psi {
        *v *= PROBE_RADIUS / norm;
    }
    if !constraints.is_constrained() {
        return Some(psi);
    }
    // the feasible steps along psi form an interval containing 0
    let feasible_at = |t: f64| {
        let shifted: Vec<f64> = params.theta.iter().zip(&psi).map(|(a, b)| a + t * b).collect();
        feasibility(params.mu, &shifted, constraints).feasible
    };
    let t = if feasible_at(1.0) {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.9 * lo
    };
    if t < 1e-6 {
        return None;
    }
    for v in &mut psi {
        *v *= t;
    }
    Some(psi)
}
