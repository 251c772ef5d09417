use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimate::{fit_l1_on, nll_on, SolverConfig};
use crate::model::{ConstraintSet, Link, SpikeTrain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_gamma: f64,
    pub gamma_grid: Vec<f64>,
    /// Mean held-out negative log-likelihood for each grid value.
    pub held_out_nll: Vec<f64>,
}

/// K-fold cross-validation over contiguous blocks of the observed bins.
/// Each fold is fitted on the other blocks and scored on its own; the history
/// of every bin is read from the full train. Ties go to the larger gamma.
pub fn cross_validate_gamma(
    train: &SpikeTrain,
    gamma_grid: &[f64],
    folds: usize,
    link: Link,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Result<CvResult> {
    if gamma_grid.is_empty() {
        return invalid("gamma grid is empty");
    }
    if gamma_grid.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return invalid("gamma values must be nonnegative numbers");
    }
    let n = train.n();
    if folds < 2 || folds > n {
        return invalid(format!("need 2 <= folds <= n, got {folds} folds for n = {n}"));
    }
    let bounds: Vec<usize> = (0..=folds).map(|k| k * n / folds).collect();

    let mut held_out_nll = Vec::with_capacity(gamma_grid.len());
    for &gamma in gamma_grid {
        let mut total = 0.0;
        for k in 0..folds {
            let (a, b) = (bounds[k], bounds[k + 1]);
            let fit_ranges: Vec<(usize, usize)> =
                [(0, a), (b, n)].into_iter().filter(|(lo, hi)| hi > lo).collect();
            let fit = fit_l1_on(train, fit_ranges, gamma, link, constraints, config)?;
            total += nll_on(&fit.params, train, vec![(a, b)], config.statistics)?;
        }
        held_out_nll.push(total / folds as f64);
    }

    let mut best = 0;
    for i in 1..gamma_grid.len() {
        let (v, bv) = (held_out_nll[i], held_out_nll[best]);
        if v < bv || (v == bv && gamma_grid[i] > gamma_grid[best]) {
            best = i;
        }
    }
    Ok(CvResult {
        best_gamma: gamma_grid[best],
        gamma_grid: gamma_grid.to_vec(),
        held_out_nll,
    })
}

/// Geometric grid `center * 2^(k/2)` for `k = -radius ..= radius`.
pub fn gamma_grid_around(center: f64, radius: i32) -> Vec<f64> {
    (-radius..=radius).map(|k| center * 2f64.powf(k as f64 / 2.0)).collect()
}
