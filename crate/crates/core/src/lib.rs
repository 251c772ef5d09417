//! Simulation, sparse estimation and validation of self-exciting binary
//! generalized linear models.
//!
//! A spike train `x_t` in {0, 1} fires in bin `t` with probability
//! `lambda_t = phi(mu + sum_k theta_k x_{t-k})`. The crate simulates such
//! trains, estimates `theta` by constrained maximum likelihood, l1-regularized
//! maximum likelihood or greedy matching pursuit, and checks fits through the
//! spectrum and time-rescaling tests.

pub mod cli;
mod design;
pub mod error;
pub mod estimate;
pub mod gof;
pub mod harness;
pub mod io;
pub mod likelihood;
pub mod model;
mod projection;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use estimate::{
    default_gamma, fit_l1, fit_ml, fit_pomp, pomp_sparsity_bound, Estimator, FitResult, SolverConfig,
};
pub use gof::{
    acf_test, empirical_null_quantiles, goodness_of_fit, ks_test, time_rescale, Confidence, GofReport,
    NullQuantiles,
};
pub use likelihood::{nll, nll_gradient, rsc_remainder, RscRemainder, Statistics, Wrt};
pub use model::{
    best_s_term, check_feasible, project_feasible, ConstraintMode, ConstraintSet, FeasibilityReport, GlmParameters,
    Link, SparsityProfile, SpikeTrain,
};
pub use simulate::{rate_sequence, simulate, stationary_rate, SimulationConfig};
pub use spectral::{power_spectral_density, theoretical_autocovariance, SpectrumResult};
