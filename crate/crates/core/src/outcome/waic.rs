use alloc::vec::Vec;

use libm::log;

use super::OutcomeError;
use crate::stats::{log_sum_exp, variance};

/// Pointwise variances above this mark the estimate as unreliable.
pub const UNSTABLE_P_WAIC: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
    /// Records whose pointwise `p_waic` exceeds [`UNSTABLE_P_WAIC`].
    pub unstable: usize,
}

/// WAIC from `[draw][record]` log-likelihoods, with the sample variance
/// (divisor S - 1) of each record's log-likelihood as its `p_waic` term.
pub fn waic(log_lik: &[Vec<f64>]) -> Result<Waic, OutcomeError> {
    let s = log_lik.len();
    if s == 0 {
        return Err(OutcomeError::NoDraws);
    }
    let n = log_lik[0].len();
    if n == 0 || log_lik.iter().any(|d| d.len() != n) {
        return Err(OutcomeError::InvalidConfig("every draw needs one log-likelihood per record"));
    }
    let ln_s = log(s as f64);
    let (mut lppd, mut p_waic, mut unstable) = (0.0, 0.0, 0);
    let mut col = Vec::with_capacity(s);
    for i in 0..n {
        col.clear();
        col.extend(log_lik.iter().map(|d| d[i]));
        lppd += log_sum_exp(&col) - ln_s;
        let v = if s > 1 { variance(&col) } else { 0.0 };
        if v > UNSTABLE_P_WAIC {
            unstable += 1;
        }
        p_waic += v;
    }
    Ok(Waic {
        waic: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
        unstable,
    })
}
