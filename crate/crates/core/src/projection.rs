//! Exact Euclidean projections onto capped simplices `{v >= 0, 1'v <= cap}`
//! and onto the joint (baseline, kernel) feasibility box.

/// A nonnegative vector prepared for repeated projections with different caps.
pub(crate) struct CappedSimplex<'a> {
    values: &'a [f64],
    /// Positive entries, descending, with prefix sums.
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl<'a> CappedSimplex<'a> {
    pub(crate) fn new(values: &'a [f64]) -> Self {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut prefix = Vec::with_capacity(sorted.len());
        let mut acc = 0.0;
        for &v in &sorted {
            acc += v;
            prefix.push(acc);
        }
        Self {
            values,
            sorted,
            prefix,
        }
    }

    /// Shift `tau >= 0` such that `max(values - tau, 0)` is the projection for
    /// the given cap. It is also the Lagrange multiplier of the sum constraint.
    pub(crate) fn threshold(&self, cap: f64) -> f64 {
        let total = self.prefix.last().copied().unwrap_or(0.0);
        if total <= cap {
            return 0.0;
        }
        if cap <= 0.0 {
            return self.sorted[0];
        }
        // largest rho with sorted[rho] > (prefix[rho] - cap) / (rho + 1)
        let mut tau = 0.0;
        for (i, (&v, &s)) in self.sorted.iter().zip(&self.prefix).enumerate() {
            let t = (s - cap) / (i + 1) as f64;
            if v > t {
                tau = t;
            } else {
                break;
            }
        }
        tau.max(0.0)
    }

    pub(crate) fn project(&self, cap: f64) -> Vec<f64> {
        let tau = self.threshold(cap);
        self.values.iter().map(|&v| (v - tau).max(0.0)).collect()
    }
}

/// Projects `(mu, theta)` onto `{pi_min <= mu - 1'theta^-, mu + 1'theta^+ <= pi_max}`.
///
/// For a fixed baseline the kernel projection splits into two capped-simplex
/// projections. The squared distance is convex in the baseline with derivative
/// `2[(mu - mu0) + tau_plus(pi_max - mu) - tau_minus(mu - pi_min)]`, which is
/// nondecreasing, so the optimal baseline is found by bisection.
pub(crate) fn project_joint(mu0: f64, theta: &[f64], pi_min: f64, pi_max: f64) -> (f64, Vec<f64>) {
    let (plus, minus): (Vec<f64>, Vec<f64>) = theta
        .iter()
        .map(|&v| (v.max(0.0), (-v).max(0.0)))
        .unzip();
    let up = CappedSimplex::new(&plus);
    let down = CappedSimplex::new(&minus);
    let slope = |mu: f64| (mu - mu0) + up.threshold(pi_max - mu) - down.threshold(mu - pi_min);

    let mu = if slope(pi_min) >= 0.0 {
        pi_min
    } else if slope(pi_max) <= 0.0 {
        pi_max
    } else {
        let (mut lo, mut hi) = (pi_min, pi_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let p = up.project(pi_max - mu);
    let m = down.project(mu - pi_min);
    (mu, p.iter().zip(&m).map(|(a, b)| a - b).collect())
}
