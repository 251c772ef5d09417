//! Negative log-likelihoods, their gradients, and the Taylor remainder used to
//! probe restricted strong convexity.

use serde::{Deserialize, Serialize};

use crate::design::HistoryDesign;
use crate::error::{invalid, Error, Result};
use crate::model::{feasibility, ConstraintSet, GlmParameters, Link, SpikeTrain, RATE_EPS};

/// Observation model behind the negative log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    #[default]
    Bernoulli,
    Poisson,
}

/// Which parameters a gradient is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Theta,
    /// Baseline first, then the kernel.
    ThetaAndMu,
}

/// Per-bin loss and its derivative with respect to the rate.
#[inline]
fn bin_loss(stats: Statistics, x: u8, rate: f64) -> (f64, f64) {
    match (stats, x) {
        (Statistics::Bernoulli, 1) => (-rate.ln(), -1.0 / rate),
        (Statistics::Bernoulli, _) => (-(1.0 - rate).ln(), 1.0 / (1.0 - rate)),
        (Statistics::Poisson, 1) => (rate - rate.ln(), 1.0 - 1.0 / rate),
        (Statistics::Poisson, _) => (rate, 1.0),
    }
}

/// Rate at linear predictor `eta`, clamped to `[eps, 1 - eps]`, plus the
/// derivative of the clamped rate (zero where the clamp is active).
#[inline]
pub(crate) fn clamped_rate(link: Link, eta: f64) -> (f64, f64) {
    let raw = link.apply(eta);
    if raw < RATE_EPS {
        (RATE_EPS, 0.0)
    } else if raw > 1.0 - RATE_EPS {
        (1.0 - RATE_EPS, 0.0)
    } else {
        (raw, link.derivative(raw))
    }
}

/// Negative log-likelihood of one spike train under a fixed link and
/// observation model, evaluated over a subset of observed bins.
#[derive(Debug, Clone)]
pub(crate) struct Objective<'a> {
    design: HistoryDesign<'a>,
    link: Link,
    stats: Statistics,
    /// Half-open ranges of observed bins that enter the average.
    ranges: Vec<(usize, usize)>,
    count: usize,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(train: &'a SpikeTrain, p: usize, link: Link, stats: Statistics) -> Result<Self> {
        let n = train.n();
        Self::restricted(train, p, link, stats, vec![(0, n)])
    }

    /// Likelihood over the observed bins in `ranges` only; the history of each
    /// bin is still read from the full train.
    pub(crate) fn restricted(
        train: &'a SpikeTrain,
        p: usize,
        link: Link,
        stats: Statistics,
        ranges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let design = HistoryDesign::new(train, p)?;
        let n = design.n();
        if ranges.iter().any(|&(a, b)| a > b || b > n) {
            return invalid("bin range out of bounds");
        }
        let count = ranges.iter().map(|&(a, b)| b - a).sum();
        if count == 0 {
            return invalid("likelihood over an empty set of bins");
        }
        Ok(Self {
            design,
            link,
            stats,
            ranges,
            count,
        })
    }

    pub(crate) fn n(&self) -> usize {
        self.design.n()
    }

    pub(crate) fn design(&self) -> &HistoryDesign<'a> {
        &self.design
    }

    /// Empirical spike rate over the bins in the objective.
    pub(crate) fn mean_response(&self) -> f64 {
        let spikes: usize = self
            .ranges
            .iter()
            .map(|&(a, b)| (a..b).filter(|&t| self.design.response(t) == 1).count())
            .sum();
        spikes as f64 / self.count as f64
    }

    pub(crate) fn value(&self, mu: f64, theta: &[f64]) -> Result<f64> {
        let mut eta = vec![0.0; self.n()];
        self.design.predictor(mu, theta, &mut eta);
        let mut total = 0.0;
        for &(a, b) in &self.ranges {
            for t in a..b {
                if !eta[t].is_finite() {
                    return Err(Error::Numeric { index: t });
                }
                let (rate, _) = clamped_rate(self.link, eta[t]);
                total += bin_loss(self.stats, self.design.response(t), rate).0;
            }
        }
        Ok(total / self.count as f64)
    }

    /// Value, kernel gradient (written to `grad`) and baseline derivative.
    pub(crate) fn value_and_gradient(&self, mu: f64, theta: &[f64], grad: &mut [f64]) -> Result<(f64, f64)> {
        let n = self.n();
        let mut w = vec![0.0; n];
        self.design.predictor(mu, theta, &mut w);
        let scale = 1.0 / self.count as f64;
        let mut total = 0.0;
        let mut in_range = vec![false; n];
        for &(a, b) in &self.ranges {
            in_range[a..b].iter_mut().for_each(|v| *v = true);
        }
        for t in 0..n {
            if !in_range[t] {
                w[t] = 0.0;
                continue;
            }
            let eta = w[t];
            if !eta.is_finite() {
                return Err(Error::Numeric { index: t });
            }
            let (rate, drate) = clamped_rate(self.link, eta);
            let (loss, dloss) = bin_loss(self.stats, self.design.response(t), rate);
            total += loss;
            w[t] = dloss * drate * scale;
        }
        self.design.transpose(&w, grad);
        let dmu = w.iter().sum();
        Ok((total * scale, dmu))
    }
}

pub fn nll(params: &GlmParameters, train: &SpikeTrain, stats: Statistics) -> Result<f64> {
    Objective::new(train, params.p(), params.link, stats)?.value(params.mu, &params.theta)
}

/// Analytic gradient of [`nll`]. With [`Wrt::ThetaAndMu`] the baseline
/// derivative comes first.
pub fn nll_gradient(params: &GlmParameters, train: &SpikeTrain, stats: Statistics, wrt: Wrt) -> Result<Vec<f64>> {
    let obj = Objective::new(train, params.p(), params.link, stats)?;
    let mut grad = vec![0.0; params.p()];
    let (_, dmu) = obj.value_and_gradient(params.mu, &params.theta, &mut grad)?;
    Ok(match wrt {
        Wrt::Theta => grad,
        Wrt::ThetaAndMu => std::iter::once(dmu).chain(grad).collect(),
    })
}

/// First-order Taylor remainder of the Bernoulli likelihood and its quadratic
/// floor `(1/n) sum_t (psi' x_t)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RscRemainder {
    pub remainder: f64,
    pub quadratic_floor: f64,
}

/// `L(theta + psi) - L(theta) - psi' grad L(theta)` for the linear-link
/// Bernoulli likelihood. Both `theta` and `theta + psi` must satisfy the
/// feasibility box, which is what makes the quadratic floor a lower bound.
pub fn rsc_remainder(
    psi: &[f64],
    params: &GlmParameters,
    train: &SpikeTrain,
    constraints: &ConstraintSet,
) -> Result<RscRemainder> {
    if !params.link.is_linear() {
        return invalid("restricted strong convexity probe needs the linear link");
    }
    if psi.len() != params.p() {
        return Err(Error::DimensionMismatch {
            expected: params.p(),
            got: psi.len(),
        });
    }
    let shifted: Vec<f64> = params.theta.iter().zip(psi).map(|(a, b)| a + b).collect();
    if constraints.is_constrained()
        && !(feasibility(params.mu, &params.theta, constraints).feasible
            && feasibility(params.mu, &shifted, constraints).feasible)
    {
        return Err(Error::InfeasiblePerturbation);
    }
    let obj = Objective::new(train, params.p(), Link::Linear, Statistics::Bernoulli)?;
    let mut grad = vec![0.0; params.p()];
    let (base, _) = obj.value_and_gradient(params.mu, &params.theta, &mut grad)?;
    let moved = obj.value(params.mu, &shifted)?;
    let directional: f64 = psi.iter().zip(&grad).map(|(a, b)| a * b).sum();

    let mut proj = vec![0.0; obj.n()];
    obj.design().predictor(0.0, psi, &mut proj);
    let quadratic_floor = proj.iter().map(|v| v * v).sum::<f64>() / obj.n() as f64;
    Ok(RscRemainder {
        remainder: moved - base - directional,
        quadratic_floor,
    })
}
