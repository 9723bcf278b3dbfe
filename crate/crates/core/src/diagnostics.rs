//! Convergence diagnostics for scalar MCMC traces.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{ceil, log, log10, sqrt};
use thiserror::Error;

use crate::normal;
use crate::stats::{mean, quantile, variance};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagnosticsError {
    #[error("no chains")]
    NoChains,
    #[error("chains have unequal lengths")]
    UnequalLengths,
    #[error("need at least {needed} samples per chain, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("quantile indicator is constant")]
    DegenerateIndicator,
}

/// A named scalar quantity traced over one or more chains.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainTrace {
    pub name: String,
    pub chains: Vec<Vec<f64>>,
}

impl ChainTrace {
    pub fn new(name: impl Into<String>, chains: Vec<Vec<f64>>) -> Self {
        Self {
            name: name.into(),
            chains,
        }
    }

    pub fn split_rhat(&self) -> Result<Rhat, DiagnosticsError> {
        split_rhat(&self.chains)
    }

    pub fn effective_sample_size(&self) -> Result<Ess, DiagnosticsError> {
        effective_sample_size(&self.chains)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rhat {
    pub value: f64,
    /// Every half-chain is constant; `value` is 1 by convention.
    pub zero_variance: bool,
}

fn check<C: AsRef<[f64]>>(chains: &[C], min_len: usize) -> Result<usize, DiagnosticsError> {
    let first = chains.first().ok_or(DiagnosticsError::NoChains)?.as_ref().len();
    if chains.iter().any(|c| c.as_ref().len() != first) {
        return Err(DiagnosticsError::UnequalLengths);
    }
    if first < min_len {
        return Err(DiagnosticsError::TooShort {
            needed: min_len,
            got: first,
        });
    }
    Ok(first)
}

/// Potential scale reduction over the halves of every chain (an odd final
/// sample is dropped).
pub fn split_rhat<C: AsRef<[f64]>>(chains: &[C]) -> Result<Rhat, DiagnosticsError> {
    let len = check(chains, 4)?;
    let n = len / 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let c = c.as_ref();
            [&c[..n], &c[n..2 * n]]
        })
        .collect();
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| variance(h)).sum::<f64>() / halves.len() as f64;
    let b = n as f64 * variance(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 {
            Rhat {
                value: 1.0,
                zero_variance: true,
            }
        } else {
            Rhat {
                value: f64::INFINITY,
                zero_variance: false,
            }
        });
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok(Rhat {
        value: sqrt(var_plus / w),
        zero_variance: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ess {
    pub value: f64,
    pub zero_variance: bool,
    /// Estimate exceeds the number of draws (negatively correlated chain).
    pub super_efficient: bool,
}

fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64
}

/// Multi-chain effective sample size from autocorrelations combined across
/// chains, truncated by Geyer's initial monotone sequence.
pub fn effective_sample_size<C: AsRef<[f64]>>(chains: &[C]) -> Result<Ess, DiagnosticsError> {
    let n = check(chains, 4)?;
    let m = chains.len();
    let chain_means: Vec<f64> = chains.iter().map(|c| mean(c.as_ref())).collect();
    let chain_vars: Vec<f64> = chains.iter().map(|c| variance(c.as_ref())).collect();
    let w = mean(&chain_vars);
    let nf = n as f64;
    let var_plus = if m > 1 {
        (nf - 1.0) / nf * w + variance(&chain_means)
    } else {
        (nf - 1.0) / nf * w
    };
    let total = (m * n) as f64;
    if !(var_plus > 0.0) {
        return Ok(Ess {
            value: total,
            zero_variance: true,
            super_efficient: false,
        });
    }
    let rho = |t: usize| -> f64 {
        let acov = chains
            .iter()
            .zip(&chain_means)
            .map(|(c, &mu)| autocovariance(c.as_ref(), mu, t))
            .sum::<f64>()
            / m as f64;
        1.0 - (w - acov) / var_plus
    };
    // Pair sums P_k = rho_{2k} + rho_{2k+1}, kept while positive and forced
    // non-increasing.
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut p = rho(t) + rho(t + 1);
        if p <= 0.0 {
            break;
        }
        if p > prev {
            p = prev;
        }
        sum_pairs += p;
        prev = p;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / log10(total));
    let value = total / tau;
    Ok(Ess {
        value,
        zero_variance: false,
        super_efficient: value > total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RafteryLewis {
    pub burn_in: usize,
    pub n_required: usize,
    pub thin: usize,
    /// Run length needed by independent draws.
    pub n_min: usize,
    pub dependence_factor: f64,
}

/// Run length needed to estimate the `q` quantile to within `+-r` with
/// probability `s`, from the two-state chain of `x <= quantile_q(x)`.
pub fn raftery_lewis(x: &[f64], q: f64, r: f64, s: f64) -> Result<RafteryLewis, DiagnosticsError> {
    if x.len() < 1000 {
        return Err(DiagnosticsError::TooShort {
            needed: 1000,
            got: x.len(),
        });
    }
    let cut = quantile(x, q);
    let z: Vec<u8> = x.iter().map(|&v| (v <= cut) as u8).collect();
    if z.iter().all(|&b| b == z[0]) {
        return Err(DiagnosticsError::DegenerateIndicator);
    }
    let eps = 0.001;
    let phi = normal::quantile((s + 1.0) / 2.0);
    let n_min = ceil(q * (1.0 - q) * phi * phi / (r * r)) as usize;

    let mut thin = 1;
    loop {
        let zt: Vec<u8> = z.iter().step_by(thin).copied().collect();
        if zt.len() < 3 || second_order_bic(&zt) <= 0.0 {
            break;
        }
        thin += 1;
    }
    let zt: Vec<u8> = z.iter().step_by(thin).copied().collect();
    let mut t = [[0.0f64; 2]; 2];
    for w in zt.windows(2) {
        t[w[0] as usize][w[1] as usize] += 1.0;
    }
    let a = t[0][1] / (t[0][0] + t[0][1]);
    let b = t[1][0] / (t[1][0] + t[1][1]);
    if !(a > 0.0 && b > 0.0) {
        return Err(DiagnosticsError::DegenerateIndicator);
    }
    let lambda = 1.0 - a - b;
    let burn_steps = if lambda.abs() < 1e-300 {
        1.0
    } else {
        ceil(log((a + b) * eps / a.max(b)) / log(lambda.abs())).max(0.0)
    };
    let burn_in = burn_steps as usize * thin;
    let keep = (2.0 - a - b) * a * b * phi * phi / ((a + b) * (a + b) * (a + b) * r * r);
    let n_keep = ceil(keep * thin as f64) as usize;
    let n_required = burn_in + n_keep;
    Ok(RafteryLewis {
        burn_in,
        n_required,
        thin,
        n_min,
        dependence_factor: n_required as f64 / n_min as f64,
    })
}

/// BIC of a second-order against a first-order binary Markov chain:
/// `G^2 - 2 log(n - 2)`; non-positive favours first order.
fn second_order_bic(z: &[u8]) -> f64 {
    let mut t = [[[0.0f64; 2]; 2]; 2];
    for w in z.windows(3) {
        t[w[0] as usize][w[1] as usize][w[2] as usize] += 1.0;
    }
    let mut g2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let obs = t[i][j][k];
                if obs == 0.0 {
                    continue;
                }
                let nij = t[i][j][0] + t[i][j][1];
                let njk = t[0][j][k] + t[1][j][k];
                let nj = t[0][j][0] + t[0][j][1] + t[1][j][0] + t[1][j][1];
                let fitted = nij * njk / nj;
                g2 += 2.0 * obs * log(obs / fitted);
            }
        }
    }
    g2 - 2.0 * log((z.len() - 2) as f64)
}
