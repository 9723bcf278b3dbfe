use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::normal;

/// Gaussian covariance `sigma_sq * exp(-|a - b|^2 / (2 phi^2))`.
pub fn gp_kernel(a: &[f64], b: &[f64], phi: f64, sigma_sq: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sigma_sq * exp(-squared_distance(a, b) / (2.0 * phi * phi))
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row-major Gram matrix of `rows` under [`gp_kernel`].
pub fn gram_matrix(rows: &[&[f64]], phi: f64, sigma_sq: f64) -> Vec<f64> {
    let n = rows.len();
    let mut g = alloc::vec![0.0; n * n];
    for i in 0..n {
        g[i * n + i] = sigma_sq;
        for j in 0..i {
            let k = gp_kernel(rows[i], rows[j], phi, sigma_sq);
            g[i * n + j] = k;
            g[j * n + i] = k;
        }
    }
    g
}

/// Lower Cholesky factor of `m + jitter * I`, starting at `start` and
/// multiplying the jitter by 10 up to `max`. Returns the factor and the
/// jitter that worked.
pub fn cholesky_with_jitter(m: &DMatrix<f64>, start: f64, max: f64) -> Option<(DMatrix<f64>, f64)> {
    let n = m.nrows();
    let mut jitter = start;
    loop {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        if let Some(c) = a.cholesky() {
            return Some((c.unpack(), jitter));
        }
        if jitter >= max * (1.0 - 1e-12) {
            return None;
        }
        jitter = (jitter * 10.0).min(max);
    }
}

/// Law of `|X|` for `X ~ N(loc, scale^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldedNormal {
    pub loc: f64,
    pub scale: f64,
}

impl FoldedNormal {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x >= 0.0) {
            return f64::NEG_INFINITY;
        }
        let v = self.scale * self.scale;
        let a = normal::ln_pdf(x, self.loc, v);
        let b = normal::ln_pdf(x, -self.loc, v);
        let m = a.max(b);
        m + log(exp(a - m) + exp(b - m))
    }

    pub fn mean(&self) -> f64 {
        let (m, s) = (self.loc, self.scale);
        s * sqrt(2.0 / core::f64::consts::PI) * exp(-m * m / (2.0 * s * s)) + m * (1.0 - 2.0 * normal::cdf(-m / s))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.loc, self.scale).expect("finite scale").sample(rng).abs()
    }
}

/// One elliptical slice step for `f ~ N(0, L L^T)` with log-likelihood
/// `log_lik`; `ll` is the log-likelihood at `f`. Returns the new state and
/// its log-likelihood.
pub fn elliptical_slice<R, F>(f: &DVector<f64>, ll: f64, lower: &DMatrix<f64>, log_lik: F, rng: &mut R) -> (DVector<f64>, f64)
where
    R: Rng + ?Sized,
    F: Fn(&DVector<f64>) -> f64,
{
    let n = f.len();
    let eps = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
    let nu = lower * eps;
    let u: f64 = rng.random();
    let threshold = ll + log(u);
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut theta = rng.random::<f64>() * two_pi;
    let (mut lo, mut hi) = (theta - two_pi, theta);
    loop {
        let prop = f * libm::cos(theta) + &nu * libm::sin(theta);
        let lp = log_lik(&prop);
        if lp > threshold {
            return (prop, lp);
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        if hi - lo < 1e-12 {
            return (f.clone(), ll);
        }
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
}
