use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::OutcomeError;
use crate::diagnostics::{effective_sample_size, split_rhat};
use crate::exec::Executor;
use crate::rng::{self, Tag};
use crate::stats::{mean, quantile_sorted, variance};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    /// Fits whose largest split R-hat reaches this are rejected.
    pub rhat_fail: f64,
    /// Return draws even when the R-hat gate fails.
    pub force: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 2000,
            draws: 4000,
            seed: 0,
            rhat_fail: 1.05,
            force: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), OutcomeError> {
        if self.chains == 0 {
            return Err(OutcomeError::InvalidConfig("need at least one chain"));
        }
        if self.draws < 4 {
            return Err(OutcomeError::InvalidConfig("need at least 4 draws per chain"));
        }
        if !(self.rhat_fail > 1.0) {
            return Err(OutcomeError::InvalidConfig("rhat_fail must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
    pub split_rhat: f64,
    pub ess: f64,
}

/// Pooled summary of a scalar traced over chains.
pub fn summarize_param(name: &str, chains: &[Vec<f64>]) -> ParamSummary {
    let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
    let m = mean(&all);
    let sd = sqrt(variance(&all));
    all.sort_by(f64::total_cmp);
    ParamSummary {
        name: String::from(name),
        mean: m,
        sd,
        median: quantile_sorted(&all, 0.5),
        q025: quantile_sorted(&all, 0.025),
        q975: quantile_sorted(&all, 0.975),
        split_rhat: split_rhat(chains).map(|r| r.value).unwrap_or(f64::NAN),
        ess: effective_sample_size(chains).map(|e| e.value).unwrap_or(f64::NAN),
    }
}

/// Random-walk proposal `theta + s * L z` with a fixed shape `L L^T` and a
/// scale tuned towards 23.4% acceptance during warm-up.
#[derive(Debug, Clone)]
pub(crate) struct RandomWalk {
    p: usize,
    /// Row-major lower Cholesky factor of the proposal shape.
    lower: Vec<f64>,
    log_scale: f64,
    window_accepts: usize,
    window_len: usize,
    windows: usize,
}

const TARGET_ACCEPT: f64 = 0.234;
const WINDOW: usize = 50;

impl RandomWalk {
    pub(crate) fn new(shape: &[f64], p: usize) -> Self {
        let m = DMatrix::from_row_slice(p, p, shape);
        let lower = match m.clone().cholesky() {
            Some(c) => c.l().transpose().as_slice().to_vec(),
            None => {
                let mut d = vec![0.0; p * p];
                for i in 0..p {
                    d[i * p + i] = sqrt(m[(i, i)].abs().max(1e-8));
                }
                d
            }
        };
        Self {
            p,
            lower,
            log_scale: log(2.38 / sqrt(p as f64)),
            window_accepts: 0,
            window_len: 0,
            windows: 0,
        }
    }

    /// `L z` for a standard normal `z`.
    pub(crate) fn shaped_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.p).map(|_| StandardNormal.sample(rng)).collect();
        (0..self.p)
            .map(|i| (0..=i).map(|j| self.lower[i * self.p + j] * z[j]).sum())
            .collect()
    }

    pub(crate) fn propose<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Vec<f64> {
        let s = exp(self.log_scale);
        self.shaped_noise(rng)
            .iter()
            .zip(theta)
            .map(|(e, t)| t + s * e)
            .collect()
    }

    pub(crate) fn record(&mut self, accepted: bool, adapting: bool) {
        if !adapting {
            return;
        }
        self.window_accepts += accepted as usize;
        self.window_len += 1;
        if self.window_len == WINDOW {
            self.windows += 1;
            let rate = self.window_accepts as f64 / WINDOW as f64;
            self.log_scale += 2.0 * (rate - TARGET_ACCEPT) / sqrt(self.windows as f64);
            self.window_accepts = 0;
            self.window_len = 0;
        }
    }
}

/// Metropolis accept step in log space.
pub(crate) fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    log_ratio.is_finite() && log(u) < log_ratio
}

pub(crate) fn chain_rng(seed: u64, chain: usize, model: u64) -> ChaCha8Rng {
    rng::tagged(seed, Tag::Outcome, chain as u64, model, 0)
}

/// Runs `cfg.chains` random-walk chains on `log_post` started from
/// `center + 2 L z` and returns retained draws as `[chain][draw][param]`.
pub(crate) fn run_random_walk<F, E>(
    log_post: &F,
    center: &[f64],
    shape: &[f64],
    cfg: &McmcConfig,
    model: u64,
    exec: &E,
) -> Vec<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64 + Sync,
    E: Executor,
{
    let p = center.len();
    exec.map_indexed(cfg.chains, |c| {
        let mut rng = chain_rng(cfg.seed, c, model);
        let mut rw = RandomWalk::new(shape, p);
        let noise = rw.shaped_noise(&mut rng);
        let mut theta: Vec<f64> = center.iter().zip(&noise).map(|(m, e)| m + 2.0 * e).collect();
        let mut lp = log_post(&theta);
        if !lp.is_finite() {
            theta = center.to_vec();
            lp = log_post(&theta);
        }
        let mut out = Vec::with_capacity(cfg.draws);
        for it in 0..cfg.warmup + cfg.draws {
            let prop = rw.propose(&theta, &mut rng);
            let lp_prop = log_post(&prop);
            let ok = accept(lp_prop - lp, &mut rng);
            if ok {
                theta = prop;
                lp = lp_prop;
            }
            rw.record(ok, it < cfg.warmup);
            if it >= cfg.warmup {
                out.push(theta.clone());
            }
        }
        out
    })
}

/// Traces of parameter `j` as `[chain][draw]`.
pub(crate) fn param_chains(draws: &[Vec<Vec<f64>>], j: usize) -> Vec<Vec<f64>> {
    draws.iter().map(|c| c.iter().map(|d| d[j]).collect()).collect()
}
