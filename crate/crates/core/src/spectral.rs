//! Second-order statistics of the linear-link process: autocovariance
//! recursion, power spectral density, a Bartlett periodogram to check them
//! against, and intrinsic-frequency readouts.
//!
//! The centred process obeys `x_t - pi* = sum_k theta_k (x_{t-k} - pi*) + e_t`
//! where `e_t = x_t - lambda_t` is a martingale difference. The spectrum is
//! therefore autoregressive, `S(w) = s2 / (2 pi |1 - Theta(w)|^2)`, plus an
//! atom `pi*^2 / (2 pi)` at `w = 0`. The innovation variance
//! `s2 = E[lambda (1 - lambda)]` is pinned down by requiring the continuous
//! part to integrate to the variance `pi* (1 - pi*)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{GlmParameters, SpikeTrain};
use crate::simulate::stationary_rate;

pub const DEFAULT_GRID_POINTS: usize = 1024;

/// A peak is reported only if it exceeds this multiple of the median density.
pub const PEAK_MEDIAN_RATIO: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Radians per bin, strictly increasing within `[0, pi]`.
    pub omega_grid: Vec<f64>,
    /// Continuous part of the spectrum on the grid.
    pub density: Vec<f64>,
    /// Weight of the `delta(w)` atom, `pi*^2 / (2 pi)`.
    pub dc_mass: f64,
    pub peak_frequency_hz: Option<f64>,
    pub stationary_rate: f64,
    pub innovation_variance: f64,
}

/// `m` uniformly spaced frequencies covering `[0, pi]`.
pub fn default_grid(m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..m).map(|i| PI * i as f64 / (m - 1) as f64).collect(),
    }
}

/// `Theta(w) = sum_k theta_k e^{-i w k}`.
pub fn kernel_transform(theta: &[f64], omega: f64) -> Complex64 {
    theta
        .iter()
        .enumerate()
        .map(|(i, &t)| Complex64::from_polar(t, -omega * (i + 1) as f64))
        .sum()
}

/// Lower bound `pi* (1 - pi*) / (2 pi (1 + 2 pi_max)^4)` on the continuous
/// density of any kernel inside the feasibility box.
pub fn density_lower_bound(pi_star: f64, pi_max: f64) -> f64 {
    pi_star * (1.0 - pi_star) / (2.0 * PI * (1.0 + 2.0 * pi_max).powi(4))
}

fn check_stationary(params: &GlmParameters) -> Result<f64> {
    let pi_star = stationary_rate(params)?;
    if !(0.0..1.0).contains(&pi_star) {
        return invalid("stationary rate outside [0, 1)");
    }
    Ok(pi_star)
}

/// Mean of `|1 - Theta(w)|^-2` over the circle, via the periodic trapezoid
/// rule on a grid refined until it settles.
fn inverse_gain_mean(theta: &[f64]) -> Result<f64> {
    let p = theta.len();
    let mut m = (4 * p).max(1024).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let mut previous: Option<f64> = None;
    while m <= 1 << 24 {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (k, &t) in theta.iter().enumerate() {
            buf[k + 1] = Complex64::new(t, 0.0);
        }
        planner.plan_fft_forward(m).process(&mut buf);
        let mean = buf
            .iter()
            .map(|z| 1.0 / (Complex64::new(1.0, 0.0) - z).norm_sqr())
            .sum::<f64>()
            / m as f64;
        if !mean.is_finite() {
            return Err(Error::Singular("kernel polynomial has a root on the unit circle".into()));
        }
        if let Some(prev) = previous {
            if (mean - prev).abs() <= 1e-13 * mean {
                return Ok(mean);
            }
        }
        previous = Some(mean);
        m *= 2;
    }
    previous.ok_or_else(|| Error::Singular("spectral integral did not settle".into()))
}

/// Continuous spectral density on `omega_grid`, the DC atom, and the
/// dominant non-DC peak converted to Hz with bin width `delta`.
pub fn power_spectral_density(params: &GlmParameters, omega_grid: &[f64], delta: f64) -> Result<SpectrumResult> {
    if omega_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("frequency grid must be strictly increasing");
    }
    if !(delta > 0.0) {
        return invalid("bin width must be positive");
    }
    let pi_star = check_stationary(params)?;
    let variance = pi_star * (1.0 - pi_star);
    let innovation_variance = variance / inverse_gain_mean(&params.theta)?;
    let continuous = |w: f64| {
        innovation_variance / (2.0 * PI * (Complex64::new(1.0, 0.0) - kernel_transform(&params.theta, w)).norm_sqr())
    };
    let density: Vec<f64> = omega_grid.iter().map(|&w| continuous(w)).collect();
    let peak_frequency_hz = dominant_peak(omega_grid, &density, &continuous).map(|w| w / (2.0 * PI * delta));
    Ok(SpectrumResult {
        omega_grid: omega_grid.to_vec(),
        density,
        dc_mass: pi_star * pi_star / (2.0 * PI),
        peak_frequency_hz,
        stationary_rate: pi_star,
        innovation_variance,
    })
}

/// Highest local maximum outside the lobe that contains `w = 0`, refined on
/// the continuous density. Equal heights (to 1e-9) resolve to the lowest
/// frequency. `None` for spectra too flat to have a meaningful peak.
fn dominant_peak(grid: &[f64], density: &[f64], f: &dyn Fn(f64) -> f64) -> Option<f64> {
    let m = grid.len();
    if m < 3 {
        return None;
    }
    let mut sorted = density.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };

    // leave the lobe around the origin, which belongs to the DC behaviour
    let mut start = 1;
    if grid[0] == 0.0 {
        while start < m && density[start] <= density[start - 1] {
            start += 1;
        }
    }

    let mut best: Option<(f64, f64)> = None;
    for i in start.max(1)..m - 1 {
        if !(density[i] >= density[i - 1] && density[i] > density[i + 1]) {
            continue;
        }
        let (w, v) = golden_max(grid[i - 1], grid[i + 1], f);
        best = match best {
            Some((bw, bv)) if v <= bv * (1.0 + 1e-9) => Some((bw, bv.max(v))),
            _ => Some((w, v)),
        };
    }
    best.filter(|&(_, v)| v > PEAK_MEDIAN_RATIO * median).map(|(w, _)| w)
}

fn golden_max(mut a: f64, mut b: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let w = 0.5 * (a + b);
    (w, f(w))
}

/// Frequency `1 / (k delta)` of the lag with the largest positive weight.
pub fn lag_frequency(theta: &[f64], delta: f64) -> Option<f64> {
    let (k, &v) = theta
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))?;
    (v > 0.0).then(|| 1.0 / ((k + 1) as f64 * delta))
}

/// Autocovariances `c_0 ..= c_max_lag` from `c_0 = pi* - pi*^2` and
/// `c_k = sum_j theta_j c_{k-j}` with `c_{-k} = c_k`. The first `p - 1` lags
/// are coupled through the symmetry and are solved jointly as a linear system.
pub fn theoretical_autocovariance(params: &GlmParameters, max_lag: usize) -> Result<Vec<f64>> {
    let pi_star = check_stationary(params)?;
    let theta = &params.theta;
    let p = theta.len();
    let c0 = pi_star - pi_star * pi_star;

    let mut c = vec![0.0; max_lag.max(p) + 1];
    c[0] = c0;
    let unknowns = p - 1;
    if unknowns > 0 {
        let mut a = DMatrix::<f64>::identity(unknowns, unknowns);
        let mut rhs = DVector::<f64>::zeros(unknowns);
        for k in 1..p {
            for j in 1..=p {
                let lag = k.abs_diff(j);
                let th = theta[j - 1];
                if lag == 0 {
                    rhs[k - 1] += th * c0;
                } else {
                    a[(k - 1, lag - 1)] -= th;
                }
            }
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("autocovariance system".into()))?;
        c[1..p].copy_from_slice(sol.as_slice());
    }
    for k in p..c.len() {
        c[k] = (1..=p).map(|j| theta[j - 1] * c[k - j]).sum();
    }
    c.truncate(max_lag + 1);
    Ok(c)
}

/// Biased sample autocovariance `(1/n) sum (x_t - m)(x_{t+k} - m)` of the
/// observed bins.
pub fn empirical_autocovariance(train: &SpikeTrain, max_lag: usize) -> Vec<f64> {
    let x = train.observations();
    let n = x.len();
    let mean = train.mean_rate();
    let centred: Vec<f64> = x.iter().map(|&b| b as f64 - mean).collect();
    (0..=max_lag)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            centred[..n - k]
                .iter()
                .zip(&centred[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    /// `2 pi j / L` for `j = 0 ..= L / 2`.
    pub omega_grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Segment-averaged periodogram of the observed bins after removing their
/// mean. Normalized so that the density integrates over `[-pi, pi]` to the
/// empirical variance of the bins used.
pub fn periodogram(train: &SpikeTrain, segment_length: usize) -> Result<Periodogram> {
    let x = train.observations();
    if segment_length == 0 || segment_length > x.len() {
        return invalid("segment length must be between 1 and n");
    }
    let l = segment_length;
    let segments = x.len() / l;
    let used = &x[..segments * l];
    let mean = used.iter().map(|&b| b as f64).sum::<f64>() / used.len() as f64;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(l);
    let half = l / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for seg in used.chunks_exact(l) {
        for (b, &v) in buf.iter_mut().zip(seg) {
            *b = Complex64::new(v as f64 - mean, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
    }
    let norm = 1.0 / (2.0 * PI * l as f64 * segments as f64);
    Ok(Periodogram {
        omega_grid: (0..=half).map(|j| 2.0 * PI * j as f64 / l as f64).collect(),
        density: acc.iter().map(|a| a * norm).collect(),
    })
}
