//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's likelihood, design or solver code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use selfexcite::Link;

/// Spiking probabilities from explicit loops over the history window.
/// `bins` holds `p` pre-history bins followed by the observations.
pub fn naive_rates(mu: f64, theta: &[f64], link: Link, bins: &[u8]) -> Vec<f64> {
    let p = theta.len();
    (p..bins.len())
        .map(|t| {
            let mut u = mu;
            for k in 1..=p {
                u += theta[k - 1] * bins[t - k] as f64;
            }
            let r = match link {
                Link::Linear => u,
                Link::Log => u.exp(),
                Link::Logistic { c } => u.exp() / (c + u.exp()),
            };
            r.clamp(1e-9, 1.0 - 1e-9)
        })
        .collect()
}

pub fn naive_nll(mu: f64, theta: &[f64], link: Link, bins: &[u8], poisson: bool) -> f64 {
    let p = theta.len();
    let rates = naive_rates(mu, theta, link, bins);
    let n = rates.len() as f64;
    let total: f64 = rates
        .iter()
        .zip(&bins[p..])
        .map(|(&r, &x)| {
            let x = x as f64;
            if poisson {
                x * r.ln() - r
            } else {
                x * r.ln() + (1.0 - x) * (1.0 - r).ln()
            }
        })
        .sum();
    -total / n
}

/// Value, gradient and Hessian in theta of the linear-link Bernoulli
/// negative log-likelihood with a known baseline.
pub fn linear_nll_derivatives(mu: f64, theta: &[f64], bins: &[u8]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = theta.len();
    let n = bins.len() - p;
    let mut value = 0.0;
    let mut grad = DVector::zeros(p);
    let mut hess = DMatrix::zeros(p, p);
    for t in p..bins.len() {
        let h = DVector::from_iterator(p, (1..=p).map(|k| bins[t - k] as f64));
        let lam = mu + theta.iter().zip(h.iter()).map(|(a, b)| a * b).sum::<f64>();
        let x = bins[t] as f64;
        value -= x * lam.ln() + (1.0 - x) * (1.0 - lam).ln();
        let d1 = -x / lam + (1.0 - x) / (1.0 - lam);
        let d2 = x / (lam * lam) + (1.0 - x) / ((1.0 - lam) * (1.0 - lam));
        grad += &h * d1;
        hess += &h * h.transpose() * d2;
    }
    let s = 1.0 / n as f64;
    (value * s, grad * s, hess * s)
}

/// Smooth convex objective of theta: value, gradient, Hessian.
pub type Smooth<'a> = dyn Fn(&[f64]) -> (f64, DVector<f64>, DMatrix<f64>) + 'a;

/// Minimizes `f(a - b) + gamma 1'(a + b)` over `a, b >= 0`, `1'a <= up`,
/// `1'b <= down` by a log-barrier path with damped Newton steps. This is
/// the l1-penalized problem over the box `1'theta^+ <= up`,
/// `1'theta^- <= down`. Returns the minimizer theta and the objective
/// `f(theta) + gamma ||theta||_1`.
pub fn barrier_solve(p: usize, up: f64, down: f64, gamma: f64, f: &Smooth, gap: f64) -> (Vec<f64>, f64) {
    let m = 2 * p;
    let mut z = DVector::from_element(m, 0.0);
    for i in 0..p {
        z[i] = 0.25 * up / p as f64;
        z[p + i] = 0.25 * down / p as f64;
    }
    let theta_of = |z: &DVector<f64>| -> Vec<f64> { (0..p).map(|i| z[i] - z[p + i]).collect() };
    let inside = |z: &DVector<f64>| {
        z.iter().all(|&v| v > 0.0) && z.rows(0, p).sum() < up && z.rows(p, p).sum() < down
    };
    let phi = |z: &DVector<f64>, t: f64| -> f64 {
        let (v, _, _) = f(&theta_of(z));
        let pen = gamma * z.sum();
        t * (v + pen) - z.iter().map(|x| x.ln()).sum::<f64>() - (up - z.rows(0, p).sum()).ln()
            - (down - z.rows(p, p).sum()).ln()
    };

    let mut t = 1.0;
    let barrier_terms = (m + 2) as f64;
    loop {
        for _ in 0..200 {
            let (_, g, h) = f(&theta_of(&z));
            let sa = up - z.rows(0, p).sum();
            let sb = down - z.rows(p, p).sum();
            let mut grad = DVector::zeros(m);
            let mut hess = DMatrix::zeros(m, m);
            for i in 0..p {
                grad[i] = t * (g[i] + gamma) - 1.0 / z[i] + 1.0 / sa;
                grad[p + i] = t * (-g[i] + gamma) - 1.0 / z[p + i] + 1.0 / sb;
                for j in 0..p {
                    hess[(i, j)] = t * h[(i, j)] + 1.0 / (sa * sa);
                    hess[(p + i, p + j)] = t * h[(i, j)] + 1.0 / (sb * sb);
                    hess[(i, p + j)] = -t * h[(i, j)];
                    hess[(p + i, j)] = -t * h[(i, j)];
                }
                hess[(i, i)] += 1.0 / (z[i] * z[i]);
                hess[(p + i, p + i)] += 1.0 / (z[p + i] * z[p + i]);
            }
            let step = hess.clone().cholesky().expect("barrier Hessian is positive definite").solve(&(-&grad));
            let decrement = -grad.dot(&step);
            if decrement / 2.0 < 1e-14 {
                break;
            }
            let base = phi(&z, t);
            let mut s = 1.0;
            loop {
                let cand = &z + &step * s;
                if inside(&cand) && phi(&cand, t) <= base - 0.25 * s * decrement {
                    z = cand;
                    break;
                }
                s *= 0.5;
                if s < 1e-20 {
                    break;
                }
            }
            if s < 1e-20 {
                break;
            }
        }
        if barrier_terms / t < gap {
            break;
        }
        t *= 8.0;
    }
    let theta = theta_of(&z);
    let (v, _, _) = f(&theta);
    let value = v + gamma * theta.iter().map(|x| x.abs()).sum::<f64>();
    (theta, value)
}

/// Euclidean projection onto the box via the barrier solver.
pub fn qp_projection(v: &[f64], up: f64, down: f64) -> Vec<f64> {
    let p = v.len();
    let target = v.to_vec();
    let f = move |theta: &[f64]| {
        let d = DVector::from_iterator(p, theta.iter().zip(&target).map(|(a, b)| a - b));
        (0.5 * d.norm_squared(), d, DMatrix::identity(p, p))
    };
    barrier_solve(p, up, down, 0.0, &f, 1e-13).0
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
