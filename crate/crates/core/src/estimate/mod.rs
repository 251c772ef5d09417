//! Constrained maximum likelihood, l1-regularized maximum likelihood and
//! greedy point-process orthogonal matching pursuit (POMP), plus the
//! regularization and iteration-count rules that accompany them.

mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::likelihood::{Objective, Statistics};
use crate::model::{ConstraintSet, GlmParameters, Link, SpikeTrain};

use solver::{Point, Problem, Solution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative objective change that counts as convergence.
    pub tol: f64,
    /// KKT residual that counts as convergence.
    pub kkt_tol: f64,
    pub step_init: f64,
    /// Step shrink factor during backtracking, in (0, 1).
    pub backtrack: f64,
    /// Fit the baseline jointly with the kernel (never penalized).
    pub estimate_baseline: bool,
    /// Known baseline, or the starting value when `estimate_baseline` is set.
    /// When estimating and absent, the start is the link-inverse of the
    /// empirical rate.
    pub baseline: Option<f64>,
    pub statistics: Statistics,
    /// Nesterov momentum with restarts.
    pub accelerate: bool,
    /// Warm start for ML and l1 fits, projected onto the constraints first.
    /// POMP always grows its support from the empty kernel.
    pub initial_theta: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-9,
            kkt_tol: 1e-6,
            step_init: 1.0,
            backtrack: 0.5,
            estimate_baseline: false,
            baseline: None,
            statistics: Statistics::Bernoulli,
            accelerate: false,
            initial_theta: None,
        }
    }
}

impl SolverConfig {
    pub fn with_baseline(mu: f64) -> Self {
        Self {
            baseline: Some(mu),
            ..Self::default()
        }
    }

    pub fn estimating_baseline() -> Self {
        Self {
            estimate_baseline: true,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return invalid("max_iters must be positive");
        }
        if !(self.tol > 0.0 && self.kkt_tol > 0.0 && self.step_init > 0.0) {
            return invalid("solver tolerances and initial step must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return invalid("backtrack factor must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ml,
    L1,
    Pomp,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Ml => "ml",
            Estimator::L1 => "l1",
            Estimator::Pomp => "pomp",
        })
    }
}

/// Estimated parameters with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: Estimator,
    pub params: GlmParameters,
    /// Final value of the minimized objective (likelihood plus penalty).
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// 1-based lags: POMP selection order, otherwise the nonzero lags.
    pub support: Vec<usize>,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// `d2 * sqrt(ln p / n)`.
pub fn default_gamma(n: usize, p: usize, d2: f64) -> f64 {
    d2 * ((p as f64).ln() / n as f64).sqrt()
}

/// Advisory POMP iteration count `ceil((4s / (pi_min^2 kappa)) ln(20s / (pi_min^2 kappa)))`.
pub fn pomp_sparsity_bound(s: usize, pi_min: f64, kappa: f64) -> Result<u64> {
    if s == 0 || !(pi_min > 0.0) || !(kappa > 0.0) {
        return invalid("sparsity, pi_min and kappa must be positive");
    }
    let base = s as f64 / (pi_min * pi_min * kappa);
    Ok((4.0 * base * (20.0 * base).ln()).ceil().max(0.0) as u64)
}

struct Setup<'a> {
    objective: Objective<'a>,
    constraints: ConstraintSet,
    start_mu: f64,
}

fn setup<'a>(
    train: &'a SpikeTrain,
    link: Link,
    constraints: &ConstraintSet,
    config: &SolverConfig,
    ranges: Option<Vec<(usize, usize)>>,
) -> Result<Setup<'a>> {
    config.validate()?;
    let ranges = ranges.unwrap_or_else(|| vec![(0, train.n())]);
    let objective = Objective::restricted(train, train.p(), link, config.statistics, ranges)?;
    if constraints.is_constrained() && !link.is_linear() {
        return invalid("the feasibility box applies to the linear link only; fit other links unconstrained");
    }
    let start_mu = match (config.baseline, config.estimate_baseline) {
        (Some(mu), _) => mu,
        (None, true) => initial_baseline(link, objective.mean_response()),
        (None, false) => return invalid("a known baseline is required unless the baseline is estimated"),
    };
    if !start_mu.is_finite() {
        return invalid("baseline must be finite");
    }
    if constraints.is_constrained() && !config.estimate_baseline {
        constraints.check_baseline(start_mu)?;
    }
    if link.is_linear() && start_mu < 0.0 {
        return invalid("baseline must be nonnegative for the linear link");
    }
    Ok(Setup {
        objective,
        constraints: *constraints,
        start_mu,
    })
}

fn initial_baseline(link: Link, rate: f64) -> f64 {
    let r = rate.clamp(1e-6, 1.0 - 1e-6);
    match link {
        Link::Linear => r,
        Link::Log => r.ln(),
        Link::Logistic { c } => (c * r / (1.0 - r)).ln(),
    }
}

fn finish(estimator: Estimator, link: Link, sol: Solution, support: Option<Vec<usize>>) -> Result<FitResult> {
    let support = support.unwrap_or_else(|| {
        sol.point
            .theta
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, _)| k + 1)
            .collect()
    });
    let mu = if link.is_linear() { sol.point.mu.max(0.0) } else { sol.point.mu };
    Ok(FitResult {
        estimator,
        params: GlmParameters::new(mu, sol.point.theta, link)?,
        objective: sol.objective,
        iterations: sol.iterations,
        kkt_residual: sol.kkt_residual,
        support,
        converged: sol.converged,
        objective_trace: sol.trace,
    })
}

/// Minimizes the negative log-likelihood over the feasibility box (or over
/// all kernels in unconstrained mode), starting from the zero kernel.
pub fn fit_ml(train: &SpikeTrain, link: Link, constraints: &ConstraintSet, config: &SolverConfig) -> Result<FitResult> {
    let mut fit = fit_penalized(train, 0.0, link, constraints, config, None)?;
    fit.estimator = Estimator::Ml;
    Ok(fit)
}

/// Minimizes `L(theta) + gamma ||theta||_1` over the feasibility box.
pub fn fit_l1(
    train: &SpikeTrain,
    gamma: f64,
    link: Link,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Result<FitResult> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return invalid("regularization weight must be a nonnegative number");
    }
    fit_penalized(train, gamma, link, constraints, config, None)
}

/// l1 fit whose likelihood averages only the observed bins in `ranges`.
pub(crate) fn fit_l1_on(
    train: &SpikeTrain,
    ranges: Vec<(usize, usize)>,
    gamma: f64,
    link: Link,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Result<FitResult> {
    fit_penalized(train, gamma, link, constraints, config, Some(ranges))
}

/// Mean negative log-likelihood of `params` over the observed bins in `ranges`.
pub(crate) fn nll_on(
    params: &GlmParameters,
    train: &SpikeTrain,
    ranges: Vec<(usize, usize)>,
    stats: Statistics,
) -> Result<f64> {
    Objective::restricted(train, params.p(), params.link, stats, ranges)?.value(params.mu, &params.theta)
}

fn fit_penalized(
    train: &SpikeTrain,
    gamma: f64,
    link: Link,
    constraints: &ConstraintSet,
    config: &SolverConfig,
    ranges: Option<Vec<(usize, usize)>>,
) -> Result<FitResult> {
    let s = setup(train, link, constraints, config, ranges)?;
    let problem = Problem {
        objective: &s.objective,
        gamma,
        constraints: s.constraints,
        estimate_baseline: config.estimate_baseline,
        free: None,
    };
    let start = Point {
        mu: s.start_mu,
        theta: match &config.initial_theta {
            Some(theta) if theta.len() != train.p() => {
                return Err(Error::DimensionMismatch {
                    expected: train.p(),
                    got: theta.len(),
                })
            }
            Some(theta) => theta.clone(),
            None => vec![0.0; train.p()],
        },
    };
    let sol = problem.solve(start, config)?;
    finish(Estimator::L1, link, sol, None)
}

/// Greedy support growth: at each step the lag with the largest absolute
/// likelihood gradient joins the support, then the likelihood is minimized
/// over kernels supported on it (warm-started, box enforced on the full
/// kernel). Gradient ties go to the smaller lag.
pub fn fit_pomp(
    train: &SpikeTrain,
    s_star: usize,
    link: Link,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Result<FitResult> {
    let p = train.p();
    if s_star > p {
        return invalid(format!("s_star = {s_star} exceeds p = {p}"));
    }
    let s = setup(train, link, constraints, config, None)?;
    let mut free = vec![false; p];
    let mut point = Point {
        mu: s.start_mu,
        theta: vec![0.0; p],
    };
    let mut support = Vec::with_capacity(s_star);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = true;

    // with a free baseline the empty-support model is fitted first
    let initial = Problem {
        objective: &s.objective,
        gamma: 0.0,
        constraints: s.constraints,
        estimate_baseline: config.estimate_baseline,
        free: Some(&free),
    };
    let mut last = initial.solve(point.clone(), config)?;
    iterations += last.iterations;
    converged &= last.converged;
    trace.extend_from_slice(&last.trace);
    point = last.point.clone();

    for _ in 0..s_star {
        let mut grad = vec![0.0; p];
        s.objective
            .value_and_gradient(point.mu, &point.theta, &mut grad)?;
        let mut best = 0;
        for (k, g) in grad.iter().enumerate() {
            if g.abs() > grad[best].abs() {
                best = k;
            }
        }
        if free[best] {
            converged = false;
            break;
        }
        free[best] = true;
        support.push(best + 1);
        let problem = Problem {
            objective: &s.objective,
            gamma: 0.0,
            constraints: s.constraints,
            estimate_baseline: config.estimate_baseline,
            free: Some(&free),
        };
        last = problem.solve(point.clone(), config)?;
        iterations += last.iterations;
        converged &= last.converged;
        trace.extend_from_slice(&last.trace[1..]);
        point = last.point.clone();
    }

    let sol = Solution {
        point,
        objective: last.objective,
        iterations,
        kkt_residual: last.kkt_residual,
        converged,
        trace,
    };
    finish(Estimator::Pomp, link, sol, Some(support))
}
