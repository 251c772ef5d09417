//! Reproducible experiments: MSE sweeps over the record length, RSC probes
//! and cross-validated regularization.

mod cv;
mod kernels;
mod rsc;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimate::{default_gamma, fit_l1, fit_ml, fit_pomp, Estimator, FitResult, SolverConfig};
use crate::model::{ConstraintSet, GlmParameters, Link, SpikeTrain};
use crate::simulate::{simulate, SimulationConfig};

pub use cv::{cross_validate_gamma, gamma_grid_around, CvResult};
pub use kernels::{random_kernel, reference_kernel, top_lags, Tail, BUDGET_FILL, REFERENCE_SUPPORT};
pub use rsc::{rsc_probe, RscReport, PROBE_RADIUS};

/// How the l1 weight is chosen for each simulated record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GammaRule {
    Fixed { value: f64 },
    /// `d2 sqrt(ln p / n)`.
    Theory { d2: f64 },
    /// Contiguous-block cross-validation over `gamma_grid_around(theory, radius)`.
    CrossValidate { d2: f64, folds: usize, radius: i32 },
}

impl GammaRule {
    pub fn gamma(
        &self,
        train: &SpikeTrain,
        link: Link,
        constraints: &ConstraintSet,
        config: &SolverConfig,
    ) -> Result<f64> {
        let (n, p) = (train.n(), train.p());
        match *self {
            GammaRule::Fixed { value } => Ok(value),
            GammaRule::Theory { d2 } => Ok(default_gamma(n, p, d2)),
            GammaRule::CrossValidate { d2, folds, radius } => {
                let grid = gamma_grid_around(default_gamma(n, p, d2), radius);
                Ok(cross_validate_gamma(train, &grid, folds, link, constraints, config)?.best_gamma)
            }
        }
    }
}

/// Constant in the theory rule used by default. It puts gamma near 0.1 for
/// n = 950 and p = 1000.
pub const DEFAULT_D2: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub p: usize,
    pub s: usize,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub mu: f64,
    pub pi_min: f64,
    pub pi_max: f64,
    pub link: Link,
    pub estimators: Vec<Estimator>,
    pub gamma: GammaRule,
    pub s_star: usize,
    pub seed: u64,
    pub output_dir: Option<String>,
    pub tail: Option<Tail>,
    /// Probes per record for the RSC bench.
    pub probes: usize,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 1000,
            s: 3,
            n_grid: vec![100, 300, 1_000, 3_000, 10_000, 100_000],
            trials: 10,
            mu: 0.1,
            pi_min: 0.01,
            pi_max: 0.49,
            link: Link::Linear,
            estimators: vec![Estimator::Ml, Estimator::L1, Estimator::Pomp],
            gamma: GammaRule::Theory { d2: DEFAULT_D2 },
            s_star: 3,
            seed: 0,
            output_dir: None,
            tail: None,
            probes: 100,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn constraints(&self) -> Result<ConstraintSet> {
        ConstraintSet::new(self.pi_min, self.pi_max)
    }

    /// Rejects configurations that cannot run, before anything is simulated.
    pub fn validate(&self) -> Result<ConstraintSet> {
        let c = self.constraints()?;
        c.check_baseline(self.mu)?;
        if !self.link.is_linear() {
            return invalid("experiments simulate the linear link inside the feasibility box");
        }
        if self.p == 0 || self.s == 0 || self.s > self.p {
            return invalid("need 1 <= s <= p");
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return invalid("n_grid must hold positive lengths");
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("n_grid must be strictly ascending");
        }
        if self.estimators.is_empty() {
            return invalid("no estimators selected");
        }
        if self.estimators.contains(&Estimator::Pomp) && (self.s_star == 0 || self.s_star > self.p) {
            return invalid("s_star must lie in 1..=p");
        }
        if let Some(t) = self.tail {
            if self.s + t.count > self.p {
                return invalid("support plus tail exceeds p");
            }
        }
        Ok(c)
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig { baseline: Some(self.mu), estimate_baseline: false, ..self.solver.clone() }
    }
}

/// RNG for one (record length, trial) cell, independent of execution order.
pub fn trial_rng(seed: u64, n_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n_index as u64) << 32) | trial as u64);
    rng
}

/// Draws the kernel and simulates the record for one sweep cell.
pub fn trial_data(config: &ExperimentConfig, n_index: usize, trial: usize) -> Result<(GlmParameters, SpikeTrain)> {
    let c = config.validate()?;
    let mut rng = trial_rng(config.seed, n_index, trial);
    let theta = random_kernel(config.p, config.s, config.mu, &c, config.tail, &mut rng)?;
    let params = GlmParameters::linear(config.mu, theta)?;
    let sim_seed: u64 = rng.random();
    let train = simulate(&params, &SimulationConfig::new(config.n_grid[n_index], sim_seed))?;
    Ok((params, train))
}

pub fn fit_estimator(
    estimator: Estimator,
    train: &SpikeTrain,
    gamma: f64,
    s_star: usize,
    link: Link,
    constraints: &ConstraintSet,
    solver: &SolverConfig,
) -> Result<FitResult> {
    match estimator {
        Estimator::Ml => fit_ml(train, link, constraints, solver),
        Estimator::L1 => fit_l1(train, gamma, link, constraints, solver),
        Estimator::Pomp => fit_pomp(train, s_star, link, constraints, solver),
    }
}

pub fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub n: usize,
    pub estimator: Estimator,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MseTable {
    pub rows: Vec<MseRow>,
}

impl MseTable {
    pub fn median(&self, n: usize, estimator: Estimator) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.estimator == estimator)
            .map(|r| r.median)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,estimator,median_mse,q05,q95,trials")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{}", r.n, r.estimator, r.median, r.q05, r.q95, r.trials)?;
        }
        Ok(())
    }
}

/// Linear-interpolated quantile of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    crate::gof::quantile_sorted(&v, q)
}

/// For every record length and trial: draw a kernel, simulate, fit each
/// estimator and record `||theta_hat - theta||^2`. Trials run in parallel;
/// every cell has its own RNG stream so the table does not depend on
/// scheduling.
pub fn mse_sweep(config: &ExperimentConfig) -> Result<MseTable> {
    let c = config.validate()?;
    let solver = config.solver();
    let cells: Vec<(usize, usize)> = (0..config.n_grid.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    let errors: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(i, t)| {
            let (params, train) = trial_data(config, i, t)?;
            let gamma = if config.estimators.contains(&Estimator::L1) {
                config.gamma.gamma(&train, config.link, &c, &solver)?
            } else {
                0.0
            };
            config
                .estimators
                .iter()
                .map(|&e| {
                    let fit = fit_estimator(e, &train, gamma, config.s_star, config.link, &c, &solver)?;
                    Ok(squared_error(&fit.params.theta, &params.theta))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut table = MseTable::default();
    for (i, &n) in config.n_grid.iter().enumerate() {
        for (j, &estimator) in config.estimators.iter().enumerate() {
            let v: Vec<f64> = (0..config.trials).map(|t| errors[i * config.trials + t][j]).collect();
            table.rows.push(MseRow {
                n,
                estimator,
                median: quantile(&v, 0.5),
                q05: quantile(&v, 0.05),
                q95: quantile(&v, 0.95),
                trials: config.trials,
            });
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscRecord {
    pub n: usize,
    pub trial: usize,
    pub report: RscReport,
}

/// RSC probes at the true kernel for every sweep cell.
pub fn rsc_sweep(config: &ExperimentConfig) -> Result<Vec<RscRecord>> {
    let c = config.validate()?;
    let cells: Vec<(usize, usize)> = (0..config.n_grid.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    cells
        .par_iter()
        .map(|&(i, t)| {
            let (params, train) = trial_data(config, i, t)?;
            let probe_seed = trial_rng(config.seed ^ 0x5253_4350, i, t).random();
            let report = rsc_probe(&params, &train, &c, config.probes, config.s, probe_seed)?;
            Ok(RscRecord { n: config.n_grid[i], trial: t, report })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("need at least two matching points");
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return invalid("log-log regression needs positive values");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return invalid("x values must not all be equal");
    }
    Ok(sxy / sxx)
}
