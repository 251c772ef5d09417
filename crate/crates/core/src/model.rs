//! Domain types shared by every module: model parameters, the feasibility
//! box on the history kernel, spike trains, and sparsity profiles.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::projection::{project_joint, CappedSimplex};

/// Clamp applied to spiking probabilities before any logarithm is taken.
pub const RATE_EPS: f64 = 1e-9;

/// Slack tolerance used when deciding feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Map from the linear predictor `mu + theta . history` to a spiking
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Link {
    #[default]
    Linear,
    Log,
    /// `e^u / (C + e^u)`.
    Logistic {
        #[serde(rename = "C")]
        c: f64,
    },
}

impl Link {
    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            Link::Linear => u,
            Link::Log => u.exp(),
            Link::Logistic { c } => 1.0 / (1.0 + c * (-u).exp()),
        }
    }

    /// Derivative of the link at `u`, given `value = apply(u)`.
    #[inline]
    pub fn derivative(&self, value: f64) -> f64 {
        match *self {
            Link::Linear => 1.0,
            Link::Log => value,
            Link::Logistic { .. } => value * (1.0 - value),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Link::Linear)
    }
}

impl std::str::FromStr for Link {
    type Err = Error;

    /// Parses `linear`, `log` or `logistic:<C>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Link::Linear),
            "log" => Ok(Link::Log),
            other => {
                let Some(c) = other.strip_prefix("logistic:") else {
                    return invalid(format!("unknown link `{other}`"));
                };
                let c: f64 = c
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad logistic constant `{c}`")))?;
                if !(c > 0.0 && c.is_finite()) {
                    return invalid("logistic constant must be positive");
                }
                Ok(Link::Logistic { c })
            }
        }
    }
}

#[derive(Deserialize)]
struct RawParameters {
    mu: f64,
    theta: Vec<f64>,
    #[serde(default)]
    link: Link,
}

/// Baseline rate, history kernel and link of a self-exciting GLM.
///
/// `theta[k - 1]` weights the bin `k` steps in the past.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameters")]
pub struct GlmParameters {
    pub mu: f64,
    pub theta: Vec<f64>,
    pub link: Link,
}

impl TryFrom<RawParameters> for GlmParameters {
    type Error = Error;

    fn try_from(raw: RawParameters) -> Result<Self> {
        GlmParameters::new(raw.mu, raw.theta, raw.link)
    }
}

impl GlmParameters {
    /// Validated constructor. The baseline must be nonnegative for the linear
    /// link; the nonlinear links accept any finite baseline.
    pub fn new(mu: f64, theta: Vec<f64>, link: Link) -> Result<Self> {
        if theta.is_empty() {
            return invalid("history kernel must have at least one lag");
        }
        if !mu.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return invalid("parameters must be finite");
        }
        if link.is_linear() && mu < 0.0 {
            return invalid("baseline rate must be nonnegative for the linear link");
        }
        if let Link::Logistic { c } = link {
            if !(c > 0.0 && c.is_finite()) {
                return invalid("logistic constant must be positive");
            }
        }
        Ok(Self { mu, theta, link })
    }

    pub fn linear(mu: f64, theta: Vec<f64>) -> Result<Self> {
        Self::new(mu, theta, Link::Linear)
    }

    pub fn p(&self) -> usize {
        self.theta.len()
    }

    /// `1' theta^+`.
    pub fn positive_mass(&self) -> f64 {
        positive_mass(&self.theta)
    }

    /// `1' theta^-`.
    pub fn negative_mass(&self) -> f64 {
        negative_mass(&self.theta)
    }

    pub fn kernel_sum(&self) -> f64 {
        self.theta.iter().sum()
    }
}

pub fn positive_mass(theta: &[f64]) -> f64 {
    theta.iter().map(|v| v.max(0.0)).sum()
}

pub fn negative_mass(theta: &[f64]) -> f64 {
    theta.iter().map(|v| (-v).max(0.0)).sum()
}

/// Elementwise positive and negative parts, `theta = plus - minus`.
pub fn split_parts(theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    theta
        .iter()
        .map(|&v| (v.max(0.0), (-v).max(0.0)))
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    Constrained,
    Unconstrained,
}

/// The box `pi_min <= mu - 1'theta^-`, `mu + 1'theta^+ <= pi_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub pi_min: f64,
    pub pi_max: f64,
    pub mode: ConstraintMode,
}

impl ConstraintSet {
    pub fn new(pi_min: f64, pi_max: f64) -> Result<Self> {
        if !(pi_min > 0.0 && pi_min < 1.0 && pi_max > 0.0 && pi_max < 1.0) {
            return invalid("pi_min and pi_max must lie in (0, 1)");
        }
        if pi_min >= pi_max {
            return invalid("pi_min must be smaller than pi_max");
        }
        Ok(Self {
            pi_min,
            pi_max,
            mode: ConstraintMode::Constrained,
        })
    }

    /// No feasibility box; fits rely on rate clamping alone.
    pub fn unconstrained() -> Self {
        Self {
            pi_min: 0.01,
            pi_max: 0.49,
            mode: ConstraintMode::Unconstrained,
        }
    }

    pub fn is_constrained(&self) -> bool {
        self.mode == ConstraintMode::Constrained
    }

    /// Set when `pi_max >= 1/2`, outside the fast-mixing regime the recovery
    /// guarantees are stated for.
    pub fn beyond_mixing_regime(&self) -> bool {
        self.is_constrained() && self.pi_max >= 0.5
    }

    pub(crate) fn check_baseline(&self, mu: f64) -> Result<()> {
        if mu <= self.pi_min || mu >= self.pi_max {
            return Err(Error::InfeasibleBaseline {
                mu,
                pi_min: self.pi_min,
                pi_max: self.pi_max,
            });
        }
        Ok(())
    }
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            pi_min: 0.01,
            pi_max: 0.49,
            mode: ConstraintMode::Constrained,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// `pi_min <= mu - 1'theta^-`
    Lower,
    /// `mu + 1'theta^+ <= pi_max`
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub inequality: Inequality,
    pub slack: f64,
}

/// Outcome of [`check_feasible`]. Slacks are reported whether or not the
/// point is feasible; a negative slack is a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub lower_slack: f64,
    pub upper_slack: f64,
    pub violations: Vec<Violation>,
}

pub fn check_feasible(params: &GlmParameters, constraints: &ConstraintSet) -> Result<FeasibilityReport> {
    if !params.link.is_linear() {
        return invalid("feasibility box is only defined for the linear link");
    }
    Ok(feasibility(params.mu, &params.theta, constraints))
}

pub(crate) fn feasibility(mu: f64, theta: &[f64], constraints: &ConstraintSet) -> FeasibilityReport {
    let lower_slack = mu - negative_mass(theta) - constraints.pi_min;
    let upper_slack = constraints.pi_max - mu - positive_mass(theta);
    let mut violations = Vec::new();
    if lower_slack < -FEASIBILITY_TOL {
        violations.push(Violation {
            inequality: Inequality::Lower,
            slack: lower_slack,
        });
    }
    if upper_slack < -FEASIBILITY_TOL {
        violations.push(Violation {
            inequality: Inequality::Upper,
            slack: upper_slack,
        });
    }
    FeasibilityReport {
        feasible: violations.is_empty(),
        lower_slack,
        upper_slack,
        violations,
    }
}

/// Euclidean projection of `theta` onto the feasibility box with `mu` held
/// fixed. The positive and negative parts are projected separately onto
/// capped simplices with caps `pi_max - mu` and `mu - pi_min`.
pub fn project_feasible(theta: &[f64], mu: f64, constraints: &ConstraintSet) -> Result<Vec<f64>> {
    if theta.is_empty() {
        return invalid("empty history kernel");
    }
    if !constraints.is_constrained() {
        return Ok(theta.to_vec());
    }
    constraints.check_baseline(mu)?;
    Ok(project_with_caps(
        theta,
        constraints.pi_max - mu,
        mu - constraints.pi_min,
    ))
}

pub(crate) fn project_with_caps(theta: &[f64], upper_cap: f64, lower_cap: f64) -> Vec<f64> {
    let (plus, minus) = split_parts(theta);
    let plus = CappedSimplex::new(&plus).project(upper_cap);
    let minus = CappedSimplex::new(&minus).project(lower_cap);
    plus.iter().zip(&minus).map(|(a, b)| a - b).collect()
}

/// Joint projection of `(mu, theta)` when the baseline is a free parameter.
pub(crate) fn project_feasible_joint(mu: f64, theta: &[f64], constraints: &ConstraintSet) -> (f64, Vec<f64>) {
    project_joint(mu, theta, constraints.pi_min, constraints.pi_max)
}

/// Compressibility of a kernel at sparsity level `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub s: usize,
    /// l1 mass outside the best s-term approximation.
    pub sigma_s: f64,
}

/// Keeps the `s` largest-magnitude entries of `theta`. Ties go to the smaller
/// lag.
pub fn best_s_term(theta: &[f64], s: usize) -> Result<(Vec<f64>, SparsityProfile)> {
    if s == 0 {
        return invalid("sparsity level must be positive");
    }
    if s > theta.len() {
        return invalid(format!("sparsity level {s} exceeds kernel length {}", theta.len()));
    }
    let mut order: Vec<usize> = (0..theta.len()).collect();
    // stable sort keeps ascending index order among equal magnitudes
    order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
    let mut kept = vec![0.0; theta.len()];
    for &i in &order[..s] {
        kept[i] = theta[i];
    }
    let sigma_s = order[s..].iter().map(|&i| theta[i].abs()).sum();
    Ok((kept, SparsityProfile { s, sigma_s }))
}

/// A binary spike train: `p` bins of pre-history followed by `n` observed bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    bins: Vec<u8>,
    history_len: usize,
    delta: f64,
}

impl SpikeTrain {
    pub fn new(prehistory: Vec<u8>, observations: Vec<u8>, delta: f64) -> Result<Self> {
        let history_len = prehistory.len();
        let mut bins = prehistory;
        bins.extend(observations);
        Self::from_bins(bins, history_len, delta)
    }

    /// Builds a train from one contiguous 0/1 sequence whose first
    /// `history_len` entries are pre-history.
    pub fn from_bins(bins: Vec<u8>, history_len: usize, delta: f64) -> Result<Self> {
        if bins.len() <= history_len {
            return invalid("spike train needs at least one observed bin");
        }
        if let Some(i) = bins.iter().position(|&b| b > 1) {
            return invalid(format!("non-binary entry at bin {i}"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return invalid("bin width must be positive");
        }
        Ok(Self {
            bins,
            history_len,
            delta,
        })
    }

    pub fn prehistory(&self) -> &[u8] {
        &self.bins[..self.history_len]
    }

    pub fn observations(&self) -> &[u8] {
        &self.bins[self.history_len..]
    }

    /// Pre-history followed by observations.
    pub fn bins(&self) -> &[u8] {
        &self.bins
    }

    pub fn p(&self) -> usize {
        self.history_len
    }

    pub fn n(&self) -> usize {
        self.bins.len() - self.history_len
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn spike_count(&self) -> usize {
        self.observations().iter().filter(|&&b| b == 1).count()
    }

    pub fn mean_rate(&self) -> f64 {
        self.spike_count() as f64 / self.n() as f64
    }

    /// Re-splits the same bin sequence so that the pre-history has length
    /// `p`, moving bins between the pre-history and the observations.
    pub fn with_history_len(&self, p: usize) -> Result<Self> {
        Self::from_bins(self.bins.clone(), p, self.delta)
    }

    /// Observed bins `range` (0-based, relative to the observations) together
    /// with the `p` bins that precede them.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n() {
            return invalid("window out of range");
        }
        let lo = start;
        let hi = self.history_len + end;
        Self::from_bins(self.bins[lo..hi].to_vec(), self.history_len, self.delta)
    }
}
