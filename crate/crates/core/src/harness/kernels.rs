//! History kernels for experiments.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{negative_mass, positive_mass, ConstraintSet};

/// Fraction of the feasibility budget a random kernel may use.
pub const BUDGET_FILL: f64 = 0.9;

/// Small entries outside the main support, making the kernel compressible
/// rather than exactly sparse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub count: usize,
    pub magnitude: f64,
}

/// Random `s`-sparse kernel. The support is uniform without replacement,
/// magnitudes are uniform on [0.5, 1] with a random sign, and the positive
/// and negative parts are each scaled to fill 90% of their mass budget. A
/// `tail` adds `count` positive entries of fixed size on further random
/// lags, taken out of the excitatory budget before scaling.
pub fn random_kernel<R: Rng>(
    p: usize,
    s: usize,
    mu: f64,
    constraints: &ConstraintSet,
    tail: Option<Tail>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let tail = tail.unwrap_or(Tail { count: 0, magnitude: 0.0 });
    if s == 0 || s + tail.count > p {
        return invalid(format!("cannot place {s} + {} entries in {p} lags", tail.count));
    }
    if !(tail.magnitude >= 0.0) {
        return invalid("tail magnitude must be nonnegative");
    }
    constraints.check_baseline(mu)?;
    let up = BUDGET_FILL * (constraints.pi_max - mu) - tail.count as f64 * tail.magnitude;
    let down = BUDGET_FILL * (mu - constraints.pi_min);
    if up <= 0.0 {
        return invalid("tail exhausts the excitatory budget");
    }

    let lags = sample(rng, p, s + tail.count).into_vec();
    let mut theta = vec![0.0; p];
    for &k in &lags[..s] {
        let m: f64 = rng.random_range(0.5..=1.0);
        theta[k] = if rng.random_bool(0.5) { m } else { -m };
    }
    let (pos, neg) = (positive_mass(&theta), negative_mass(&theta));
    for v in &mut theta {
        if *v > 0.0 {
            *v *= up / pos;
        } else if *v < 0.0 {
            *v *= down / neg;
        }
    }
    for &k in &lags[s..] {
        theta[k] = tail.magnitude;
    }
    Ok(theta)
}

/// Fixed compressible kernel on 1000 lags: three dominant lags (150, 405,
/// 800) of weight 0.12 and ten entries of +-0.005, so the best 3-term
/// approximation leaves an l1 remainder of 0.05. Feasible for a baseline of
/// 0.1 with bounds (0.01, 0.49).
pub fn reference_kernel() -> Vec<f64> {
    let mut theta = vec![0.0; 1000];
    for lag in [150, 405, 800] {
        theta[lag - 1] = 0.12;
    }
    for (i, lag) in [50, 250, 300, 350, 500, 550, 600, 650, 700, 900].into_iter().enumerate() {
        theta[lag - 1] = if i % 2 == 0 { 0.005 } else { -0.005 };
    }
    theta
}

pub const REFERENCE_SUPPORT: [usize; 3] = [150, 405, 800];

/// 1-based lags of the `k` largest |theta|, ascending. Ties go to the
/// smaller lag.
pub fn top_lags(theta: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
    let mut top: Vec<usize> = order.into_iter().take(k).map(|i| i + 1).collect();
    top.sort_unstable();
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{best_s_term, check_feasible, GlmParameters};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_kernels_fill_the_budget() {
        let c = ConstraintSet::new(0.01, 0.49).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let theta = random_kernel(200, 3, 0.1, &c, None, &mut rng).unwrap();
            assert_eq!(theta.iter().filter(|v| **v != 0.0).count(), 3);
            let pos = positive_mass(&theta);
            let neg = negative_mass(&theta);
            assert!(pos == 0.0 || (pos - 0.9 * 0.39).abs() < 1e-12);
            assert!(neg == 0.0 || (neg - 0.9 * 0.09).abs() < 1e-12);
            let params = GlmParameters::linear(0.1, theta).unwrap();
            assert!(check_feasible(&params, &c).unwrap().feasible);
        }
    }

    #[test]
    fn tail_is_compressible_part() {
        let c = ConstraintSet::new(0.01, 0.49).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tail = Tail { count: 2, magnitude: 0.025 };
        let theta = random_kernel(100, 3, 0.1, &c, Some(tail), &mut rng).unwrap();
        let (_, profile) = best_s_term(&theta, 3).unwrap();
        assert!((profile.sigma_s - 0.05).abs() < 1e-12);
    }

    #[test]
    fn reference_kernel_shape() {
        let theta = reference_kernel();
        let (_, profile) = best_s_term(&theta, 3).unwrap();
        assert!((profile.sigma_s - 0.05).abs() < 1e-12);
        assert_eq!(top_lags(&theta, 3), REFERENCE_SUPPORT.to_vec());
        let params = GlmParameters::linear(0.1, theta).unwrap();
        let c = ConstraintSet::new(0.01, 0.49).unwrap();
        assert!(check_feasible(&params, &c).unwrap().feasible);
    }

    #[test]
    fn top_lags_ties_prefer_small_lags() {
        assert_eq!(top_lags(&[0.1, -0.3, 0.1, 0.1], 2), vec![1, 2]);
    }
}
