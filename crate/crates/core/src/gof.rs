//! Time-rescaling goodness of fit. Under the fitted rates the integrated
//! intensity between consecutive spikes should be unit exponential, so
//! `u = 1 - e^{-z}` is uniform (KS test) and `Phi^{-1}(u)` is white (ACF test).

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::model::SpikeTrain;

pub const MIN_KS_EVENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Confidence {
    #[default]
    #[serde(rename = "0.95")]
    P95,
    #[serde(rename = "0.99")]
    P99,
}

impl Confidence {
    pub fn level(self) -> f64 {
        match self {
            Confidence::P95 => 0.95,
            Confidence::P99 => 0.99,
        }
    }

    /// Asymptotic Kolmogorov coefficient, band = c / sqrt(J).
    pub fn ks_coefficient(self) -> f64 {
        match self {
            Confidence::P95 => 1.36,
            Confidence::P99 => 1.63,
        }
    }

    /// Two-sided normal quantile, band = z / sqrt(J).
    pub fn acf_coefficient(self) -> f64 {
        match self {
            Confidence::P95 => 1.96,
            Confidence::P99 => 2.575,
        }
    }
}

impl std::str::FromStr for Confidence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0.95" | "95" => Ok(Confidence::P95),
            "0.99" | "99" => Ok(Confidence::P99),
            _ => invalid(format!("confidence must be 0.95 or 0.99, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_band: f64,
    pub ks_pass: bool,
    pub acf: Vec<f64>,
    pub acf_band: f64,
    pub acf_pass: bool,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub band: f64,
    pub pass: bool,
    /// `(b_k, u_(k))` pairs for the 45 degree plot.
    pub quantile_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfResult {
    /// Autocorrelation at lags `1..=max_lag`.
    pub acf: Vec<f64>,
    pub band: f64,
    pub pass: bool,
}

/// Integrated intensity between consecutive spikes, each bin contributing
/// `-ln(1 - lambda)`.
pub fn time_rescale(train: &SpikeTrain, rates: &[f64]) -> Result<Vec<f64>> {
    let x = train.observations();
    if rates.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: rates.len() });
    }
    if let Some(i) = rates.iter().position(|&r| !(r > 0.0 && r < 1.0)) {
        return invalid(format!("rate at bin {i} is {} but must lie in (0, 1)", rates[i]));
    }
    let spikes = train.spike_count();
    if spikes < 2 {
        return Err(Error::InsufficientEvents { needed: 2, found: spikes });
    }
    let mut z = Vec::with_capacity(spikes - 1);
    let mut acc = 0.0;
    let mut started = false;
    for (&b, &r) in x.iter().zip(rates) {
        if started {
            acc += -(-r).ln_1p();
        }
        if b == 1 {
            if started {
                z.push(acc);
            }
            started = true;
            acc = 0.0;
        }
    }
    Ok(z)
}

/// Sorted rescaled intervals from a reference realization, used as the KS
/// null in place of the unit exponential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullQuantiles {
    sorted: Vec<f64>,
}

impl NullQuantiles {
    pub fn from_intervals(z: &[f64]) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::InsufficientEvents { needed: 3, found: z.len() + 1 });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return invalid("rescaled intervals must be finite");
        }
        let mut sorted = z.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Linear-interpolated quantile at level `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.sorted, q)
    }

    /// Mid-rank empirical CDF, `(#{< z} + #{= z} / 2) / M`.
    pub fn cdf(&self, z: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v < z);
        let upto = self.sorted.partition_point(|&v| v <= z);
        (below as f64 + 0.5 * (upto - below) as f64) / self.sorted.len() as f64
    }
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn empirical_null_quantiles(train: &SpikeTrain, rates: &[f64]) -> Result<NullQuantiles> {
    NullQuantiles::from_intervals(&time_rescale(train, rates)?)
}

fn check_events(j: usize) -> Result<()> {
    if j < MIN_KS_EVENTS {
        return Err(Error::InsufficientEvents { needed: MIN_KS_EVENTS + 1, found: j + 1 });
    }
    Ok(())
}

/// KS distance between the ordered `u` and the plotting positions
/// `(k - 1/2) / J`. With a `null` table the statistic is instead the
/// two-sample distance between the empirical laws of `z` and of the table,
/// with band `c sqrt(1/J + 1/M)`; the quantile curve then plots the table's
/// CDF at the ordered `z`.
pub fn ks_test(z: &[f64], confidence: Confidence, null: Option<&NullQuantiles>) -> Result<KsResult> {
    let j = z.len();
    check_events(j)?;
    if z.iter().any(|v| v.is_nan()) {
        return invalid("rescaled intervals must not be NaN");
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let jf = j as f64;
    let quantile_curve: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(k, &zk)| {
            let u = match null {
                Some(table) => table.cdf(zk),
                None => -(-zk).exp_m1(),
            };
            ((k as f64 + 0.5) / jf, u)
        })
        .collect();
    let (statistic, scale) = match null {
        Some(table) => (
            two_sample_distance(&sorted, &table.sorted),
            (1.0 / jf + 1.0 / table.len() as f64).sqrt(),
        ),
        None => (
            quantile_curve.iter().map(|(b, u)| (u - b).abs()).fold(0.0, f64::max),
            1.0 / jf.sqrt(),
        ),
    };
    let band = confidence.ks_coefficient() * scale;
    Ok(KsResult { statistic, band, pass: statistic < band, quantile_curve })
}

/// `sup_x |F_a(x) - F_b(x)|` for two sorted samples, evaluated at every jump.
fn two_sample_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut k) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() || k < b.len() {
        let x = match (a.get(i), b.get(k)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while k < b.len() && b[k] <= x {
            k += 1;
        }
        d = d.max((i as f64 / na - k as f64 / nb).abs());
    }
    d
}

/// Sample autocorrelation of `Phi^{-1}(u)` at lags `1..=max_lag`; passes
/// when every lag lies inside `z / sqrt(J)`.
pub fn acf_test(z: &[f64], confidence: Confidence, max_lag: usize) -> Result<AcfResult> {
    let j = z.len();
    check_events(j)?;
    if j <= max_lag + 5 {
        return Err(Error::InsufficientEvents { needed: max_lag + 7, found: j + 1 });
    }
    let jf = j as f64;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let lo = 0.5 / jf;
    let v: Vec<f64> = z
        .iter()
        .map(|&zk| normal.inverse_cdf((-(-zk).exp_m1()).clamp(lo, 1.0 - lo)))
        .collect();
    let mean = v.iter().sum::<f64>() / jf;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let denom: f64 = c.iter().map(|x| x * x).sum();
    let acf: Vec<f64> = (1..=max_lag)
        .map(|k| {
            if denom == 0.0 {
                return 0.0;
            }
            c[..j - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / denom
        })
        .collect();
    let band = confidence.acf_coefficient() / jf.sqrt();
    let pass = acf.iter().all(|r| r.abs() <= band);
    Ok(AcfResult { acf, band, pass })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GofOptions {
    pub confidence: Confidence,
    pub max_lag: usize,
}

impl Default for GofOptions {
    fn default() -> Self {
        Self { confidence: Confidence::P95, max_lag: 2 }
    }
}

/// Full report plus the KS quantile curve for plotting.
pub fn goodness_of_fit(
    train: &SpikeTrain,
    rates: &[f64],
    options: &GofOptions,
    null: Option<&NullQuantiles>,
) -> Result<(GofReport, KsResult)> {
    let z = time_rescale(train, rates)?;
    let ks = ks_test(&z, options.confidence, null)?;
    let acf = acf_test(&z, options.confidence, options.max_lag)?;
    let u = z.iter().map(|&v| -(-v).exp_m1()).collect();
    let report = GofReport {
        z,
        u,
        ks_statistic: ks.statistic,
        ks_band: ks.band,
        ks_pass: ks.pass,
        acf: acf.acf,
        acf_band: acf.band,
        acf_pass: acf.pass,
        confidence: options.confidence,
    };
    Ok((report, ks))
}

pub fn write_ks_csv<W: Write>(ks: &KsResult, mut out: W) -> Result<()> {
    writeln!(out, "model_quantile,empirical_quantile,lower,upper")?;
    for &(b, u) in &ks.quantile_curve {
        writeln!(out, "{b},{u},{},{}", b - ks.band, b + ks.band)?;
    }
    Ok(())
}

pub fn write_acf_csv<W: Write>(report: &GofReport, mut out: W) -> Result<()> {
    writeln!(out, "lag,acf,lower,upper")?;
    for (k, r) in report.acf.iter().enumerate() {
        writeln!(out, "{},{r},{},{}", k + 1, -report.acf_band, report.acf_band)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate_intervals() {
        let mut obs = vec![0u8; 50];
        for i in (0..50).step_by(10) {
            obs[i] = 1;
        }
        let t = SpikeTrain::new(vec![0], obs, 0.001).unwrap();
        let z = time_rescale(&t, &vec![0.1; 50]).unwrap();
        assert_eq!(z.len(), 4);
        for v in z {
            assert!((v - 1.053605156578263).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_two_spikes() {
        let t = SpikeTrain::new(vec![0], vec![0, 1, 0], 1.0).unwrap();
        assert!(matches!(
            time_rescale(&t, &[0.5; 3]),
            Err(Error::InsufficientEvents { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn bands() {
        let z = vec![1.0; 100];
        assert!((ks_test(&z, Confidence::P95, None).unwrap().band - 0.136).abs() < 1e-15);
        assert!((ks_test(&z, Confidence::P99, None).unwrap().band - 0.163).abs() < 1e-15);
        let z = vec![1.0; 400];
        assert!((acf_test(&z, Confidence::P95, 1).unwrap().band - 0.098).abs() < 1e-15);
    }

    #[test]
    fn perfect_plotting_positions() {
        let j = 50;
        let z: Vec<f64> = (0..j).map(|k| -(1.0 - (k as f64 + 0.5) / j as f64).ln()).collect();
        let ks = ks_test(&z, Confidence::P95, None).unwrap();
        assert!(ks.statistic < 1e-12);
        assert!(ks.pass);
    }

    #[test]
    fn pairwise_duplicates_fail_acf() {
        let base: Vec<f64> = (0..300).map(|k| ((k * 7919) % 1000) as f64 / 300.0 + 0.01).collect();
        let z: Vec<f64> = base.iter().flat_map(|&v| [v, v]).collect();
        let acf = acf_test(&z, Confidence::P95, 3).unwrap();
        assert!(acf.acf[0] > 3.0 * acf.band);
        assert!(!acf.pass);
    }

    #[test]
    fn lag_zero_always_passes() {
        let z = vec![0.5; 20];
        assert!(acf_test(&z, Confidence::P95, 0).unwrap().pass);
        assert!(acf_test(&z, Confidence::P95, 15).is_err());
        assert!(ks_test(&z[..9], Confidence::P95, None).is_err());
    }

    #[test]
    fn self_null_has_zero_distance() {
        let z: Vec<f64> = (0..200).map(|k| 0.01 + k as f64 * 0.013).collect();
        let table = NullQuantiles::from_intervals(&z).unwrap();
        let ks = ks_test(&z, Confidence::P95, Some(&table)).unwrap();
        assert!(ks.statistic < 1e-12);
        assert!((ks.band - 1.36 * (2.0 / 200.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_sample_distance_of_shifted_samples() {
        assert_eq!(two_sample_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(two_sample_distance(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(two_sample_distance(&[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 2.0, 2.0]), 0.25);
    }

    #[test]
    fn quantile_interpolates() {
        let table = NullQuantiles::from_intervals(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(table.quantile(0.0), 1.0);
        assert_eq!(table.quantile(0.25), 1.5);
        assert_eq!(table.quantile(1.0), 3.0);
        assert_eq!(table.cdf(2.0), 0.5);
    }

    #[test]
    fn confidence_serializes_as_level() {
        assert_eq!(serde_json::to_string(&Confidence::P99).unwrap(), "\"0.99\"");
    }
}
