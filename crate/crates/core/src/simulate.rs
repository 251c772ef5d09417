//! Sequential generation of the self-exciting process and its closed-form
//! stationary rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::HistoryDesign;
use crate::error::{invalid, Error, Result};
use crate::likelihood::clamped_rate;
use crate::model::{GlmParameters, SpikeTrain};

/// Burn-in length, in multiples of `p`, used when none is given.
pub const DEFAULT_BURN_IN_FACTOR: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Bins to record.
    pub n: usize,
    /// Bins generated and discarded before recording; `None` means `50 p`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    pub seed: u64,
    /// Bins before the first generated one, oldest first; all zeros if absent.
    #[serde(default)]
    pub initial_history: Option<Vec<u8>>,
    /// Seconds per bin, carried into the returned train.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.001
}

impl SimulationConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            burn_in: None,
            seed,
            initial_history: None,
            delta: default_delta(),
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

/// Spiking probability of every observed bin, `phi(mu + theta' x_{t-p..t-1})`,
/// clamped to `[1e-9, 1 - 1e-9]`.
pub fn rate_sequence(params: &GlmParameters, train: &SpikeTrain) -> Result<Vec<f64>> {
    let design = HistoryDesign::new(train, params.p())?;
    let mut eta = vec![0.0; train.n()];
    design.predictor(params.mu, &params.theta, &mut eta);
    eta.iter()
        .enumerate()
        .map(|(t, &e)| {
            if e.is_finite() {
                Ok(clamped_rate(params.link, e).0)
            } else {
                Err(Error::Numeric { index: t })
            }
        })
        .collect()
}

/// Draws a realization bin by bin. Identical seeds give identical trains.
///
/// For the linear link a probability outside `[0, 1]` is an error rather
/// than something to clamp.
pub fn simulate(params: &GlmParameters, config: &SimulationConfig) -> Result<SpikeTrain> {
    let p = params.p();
    if config.n == 0 {
        return invalid("simulation length must be positive");
    }
    let burn_in = config.burn_in.unwrap_or(DEFAULT_BURN_IN_FACTOR * p);
    let total = p + burn_in + config.n;

    let mut bins = vec![0u8; total];
    if let Some(init) = &config.initial_history {
        if init.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: init.len(),
            });
        }
        if init.iter().any(|&b| b > 1) {
            return invalid("initial history must be binary");
        }
        bins[..p].copy_from_slice(init);
    }

    // eta[i] accumulates the contributions of spikes already drawn
    let mut eta = vec![params.mu; total];
    let excite = |eta: &mut [f64], j: usize| {
        let end = (j + p).min(total - 1);
        if j < end {
            for (e, th) in eta[j + 1..=end].iter_mut().zip(&params.theta) {
                *e += th;
            }
        }
    };
    for j in 0..p {
        if bins[j] == 1 {
            excite(&mut eta, j);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for i in p..total {
        let rate = if params.link.is_linear() {
            let r = eta[i];
            if !(-1e-12..=1.0 + 1e-12).contains(&r) || r.is_nan() {
                return Err(Error::ModelInvalid { index: i - p, value: r });
            }
            r.clamp(0.0, 1.0)
        } else {
            if !eta[i].is_finite() {
                return Err(Error::Numeric { index: i - p });
            }
            clamped_rate(params.link, eta[i]).0
        };
        if rng.random::<f64>() < rate {
            bins[i] = 1;
            excite(&mut eta, i);
        }
    }

    SpikeTrain::from_bins(bins[burn_in..].to_vec(), p, config.delta)
}

/// `pi* = mu / (1 - 1'theta)` for the linear link.
pub fn stationary_rate(params: &GlmParameters) -> Result<f64> {
    if !params.link.is_linear() {
        return invalid("closed-form stationary rate needs the linear link");
    }
    let kernel_sum = params.kernel_sum();
    if kernel_sum >= 1.0 {
        return Err(Error::Nonstationary { kernel_sum });
    }
    Ok(params.mu / (1.0 - kernel_sum))
}
