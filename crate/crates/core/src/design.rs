//! The history design matrix of a spike train, applied implicitly.
//!
//! Row `t` of the design holds the `p` bins preceding observation `t`, lag 1
//! first. Rows are never materialized: each spike contributes a contiguous run
//! of kernel entries to the linear predictor, so both products below cost
//! `O(spikes * p)` and vectorize well.

use crate::error::{Error, Result};
use crate::model::SpikeTrain;

#[derive(Debug, Clone)]
pub(crate) struct HistoryDesign<'a> {
    bins: &'a [u8],
    p: usize,
    n: usize,
    /// Positions (into `bins`) of spikes that precede at least one observation.
    spikes: Vec<usize>,
}

impl<'a> HistoryDesign<'a> {
    /// A pre-history longer than `p` is allowed; only its last `p` bins are used.
    pub(crate) fn new(train: &'a SpikeTrain, p: usize) -> Result<Self> {
        if train.p() < p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: train.p(),
            });
        }
        let bins = &train.bins()[train.p() - p..];
        let n = train.n();
        let spikes = bins[..bins.len() - 1]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(j, _)| j)
            .collect();
        Ok(Self { bins, p, n, spikes })
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    /// Observed value of bin `t`.
    #[inline]
    pub(crate) fn response(&self, t: usize) -> u8 {
        self.bins[self.p + t]
    }

    /// Observations whose history window contains the spike at `j`, and the
    /// kernel offset matching the first of them.
    #[inline]
    fn span(&self, j: usize) -> (usize, usize, usize) {
        let t0 = (j + 1).saturating_sub(self.p);
        let t1 = j.min(self.n - 1);
        (t0, t1, t0 + self.p - 1 - j)
    }

    /// `out[t] = offset + sum_k theta[k-1] * x[t-k]`.
    pub(crate) fn predictor(&self, offset: f64, theta: &[f64], out: &mut [f64]) {
        debug_assert_eq!(theta.len(), self.p);
        debug_assert_eq!(out.len(), self.n);
        out.fill(offset);
        for &j in &self.spikes {
            let (t0, t1, k0) = self.span(j);
            if t0 > t1 {
                continue;
            }
            let len = t1 - t0 + 1;
            for (o, th) in out[t0..=t1].iter_mut().zip(&theta[k0..k0 + len]) {
                *o += th;
            }
        }
    }

    /// `out[k-1] = sum_t w[t] * x[t-k]`, the transpose product.
    pub(crate) fn transpose(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.n);
        debug_assert_eq!(out.len(), self.p);
        out.fill(0.0);
        for &j in &self.spikes {
            let (t0, t1, k0) = self.span(j);
            if t0 > t1 {
                continue;
            }
            let len = t1 - t0 + 1;
            for (o, wt) in out[k0..k0 + len].iter_mut().zip(&w[t0..=t1]) {
                *o += wt;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_row(train: &SpikeTrain, t: usize) -> Vec<f64> {
        let p = train.p();
        (1..=p).map(|k| train.bins()[p + t - k] as f64).collect()
    }

    #[test]
    fn products_match_dense_rows() {
        let train = SpikeTrain::new(vec![1, 0, 1], vec![1, 0, 0, 1, 1, 0, 1], 1.0).unwrap();
        let d = HistoryDesign::new(&train, 3).unwrap();
        let theta = [0.3, -0.2, 0.05];
        let mut eta = vec![0.0; train.n()];
        d.predictor(0.1, &theta, &mut eta);
        for t in 0..train.n() {
            let row = naive_row(&train, t);
            let expect: f64 = 0.1 + row.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>();
            assert!((eta[t] - expect).abs() < 1e-15);
        }
        let w: Vec<f64> = (0..train.n()).map(|t| (t as f64 * 0.37).sin()).collect();
        let mut g = vec![0.0; 3];
        d.transpose(&w, &mut g);
        for k in 0..3 {
            let expect: f64 = (0..train.n()).map(|t| w[t] * naive_row(&train, t)[k]).sum();
            assert!((g[k] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_wrong_order() {
        let train = SpikeTrain::new(vec![0, 1], vec![1], 1.0).unwrap();
        assert!(HistoryDesign::new(&train, 3).is_err());
    }
}
