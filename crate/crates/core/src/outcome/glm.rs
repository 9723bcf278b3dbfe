use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::OutcomeError;
use crate::stats::{inv_logit, ln_binomial, log1p_exp};

/// Binomial-logit likelihood `y_i ~ Bin(n_i, logit^-1(x_i . theta + o_i))`
/// with a dense design.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialLogit {
    pub names: Vec<String>,
    pub p: usize,
    /// Row-major `n x p`.
    pub x: Vec<f64>,
    pub successes: Vec<f64>,
    pub trials: Vec<f64>,
    pub offset: Vec<f64>,
    ln_choose: Vec<f64>,
}

/// Posterior mode under flat priors and the inverse observed information.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub theta: Vec<f64>,
    /// Row-major `p x p`.
    pub covariance: Vec<f64>,
    pub log_lik: f64,
}

impl BinomialLogit {
    pub fn new(names: Vec<String>, rows: &[Vec<f64>], successes: &[u64], trials: &[u64]) -> Self {
        let p = names.len();
        let mut x = Vec::with_capacity(rows.len() * p);
        for r in rows {
            debug_assert_eq!(r.len(), p);
            x.extend_from_slice(r);
        }
        Self {
            names,
            p,
            x,
            successes: successes.iter().map(|&s| s as f64).collect(),
            trials: trials.iter().map(|&t| t as f64).collect(),
            offset: vec![0.0; rows.len()],
            ln_choose: trials.iter().zip(successes).map(|(&n, &k)| ln_binomial(n, k)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.successes.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Linear predictor without the offset.
    #[inline]
    pub fn xb(&self, theta: &[f64], i: usize) -> f64 {
        self.row(i).iter().zip(theta).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn eta(&self, theta: &[f64], i: usize) -> f64 {
        self.xb(theta, i) + self.offset[i]
    }

    /// Log-likelihood of record `i` at linear predictor `eta`, including the
    /// binomial coefficient.
    #[inline]
    pub fn log_lik_at(&self, i: usize, eta: f64) -> f64 {
        self.ln_choose[i] + self.successes[i] * eta - self.trials[i] * log1p_exp(eta)
    }

    pub fn log_lik(&self, theta: &[f64]) -> f64 {
        (0..self.n()).map(|i| self.log_lik_at(i, self.eta(theta, i))).sum()
    }

    pub fn pointwise(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.log_lik_at(i, self.eta(theta, i))).collect()
    }

    /// Removes design columns that are zero in every row; returns the
    /// removed names.
    pub fn drop_empty_columns(&mut self) -> Vec<String> {
        let n = self.n();
        let keep: Vec<bool> = (0..self.p).map(|j| (0..n).any(|i| self.x[i * self.p + j] != 0.0)).collect();
        if keep.iter().all(|&k| k) {
            return Vec::new();
        }
        let mut x = Vec::with_capacity(self.x.len());
        for i in 0..n {
            for j in 0..self.p {
                if keep[j] {
                    x.push(self.x[i * self.p + j]);
                }
            }
        }
        let mut dropped = Vec::new();
        let mut names = Vec::new();
        for (name, k) in self.names.drain(..).zip(&keep) {
            if *k {
                names.push(name);
            } else {
                dropped.push(name);
            }
        }
        self.names = names;
        self.p = self.names.len();
        self.x = x;
        dropped
    }

    fn information(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.p;
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for i in 0..self.n() {
            let mu = inv_logit(self.eta(theta, i));
            let resid = self.successes[i] - self.trials[i] * mu;
            let w = self.trials[i] * mu * (1.0 - mu);
            let r = self.row(i);
            for a in 0..p {
                if r[a] == 0.0 {
                    continue;
                }
                g[a] += r[a] * resid;
                for b in 0..=a {
                    h[(a, b)] += w * r[a] * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        (g, h)
    }

    fn separation(&self, theta: &[f64]) -> OutcomeError {
        let j = (0..self.p).fold(0, |b, j| if theta[j].abs() > theta[b].abs() { j } else { b });
        OutcomeError::Separation {
            coefficient: self.names.get(j).cloned().unwrap_or_default(),
        }
    }

    /// First column that is a linear combination of the columns before it
    /// (modified Gram-Schmidt, relative tolerance 1e-9).
    pub fn dependent_column(&self) -> Option<usize> {
        let n = self.n();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for j in 0..self.p {
            let mut v: Vec<f64> = (0..n).map(|i| self.x[i * self.p + j]).collect();
            let norm0 = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
            for q in &basis {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(q) {
                    *a -= d * b;
                }
            }
            let norm = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
            if !(norm > 1e-9 * norm0) {
                return Some(j);
            }
            basis.push(v.into_iter().map(|a| a / norm).collect());
        }
        None
    }

    /// Newton's method with step halving from zero. Divergence (|theta| >
    /// 50, a singular information matrix or no convergence) is reported as
    /// separation on the largest coefficient.
    pub fn find_mode(&self) -> Result<Mode, OutcomeError> {
        if let Some(j) = self.dependent_column() {
            return Err(OutcomeError::RankDeficient {
                coefficient: self.names[j].clone(),
            });
        }
        let p = self.p;
        let mut theta = vec![0.0; p];
        let mut ll = self.log_lik(&theta);
        for _ in 0..200 {
            let (g, h) = self.information(&theta);
            let chol = h.clone().cholesky().ok_or_else(|| self.separation(&theta))?;
            let step = chol.solve(&g);
            let mut t = 1.0;
            let mut next = theta.clone();
            let mut next_ll = f64::NEG_INFINITY;
            for _ in 0..40 {
                for j in 0..p {
                    next[j] = theta[j] + t * step[j];
                }
                next_ll = self.log_lik(&next);
                if next_ll >= ll - 1e-10 {
                    break;
                }
                t *= 0.5;
            }
            let moved = (0..p).map(|j| (next[j] - theta[j]).abs()).fold(0.0, f64::max);
            theta = next;
            let gain = next_ll - ll;
            ll = next_ll;
            if theta.iter().any(|v| !(v.abs() <= 50.0)) {
                return Err(self.separation(&theta));
            }
            if moved < 1e-10 || (gain.abs() < 1e-12 && moved < 1e-6) {
                let (_, h) = self.information(&theta);
                let chol = h.cholesky().ok_or_else(|| self.separation(&theta))?;
                let cov = chol.inverse();
                return Ok(Mode {
                    theta,
                    covariance: cov.transpose().as_slice().to_vec(),
                    log_lik: ll,
                });
            }
        }
        Err(self.separation(&theta))
    }
}
