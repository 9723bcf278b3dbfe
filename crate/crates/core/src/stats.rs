//! Small numerical helpers shared across modules.

use alloc::vec::Vec;

use libm::{exp, lgamma, log, log1p};

/// `log(sum(exp(xs)))`, stable for large magnitudes. Empty or all `-inf`
/// input gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + log(s)
}

/// Draws an index from unnormalized log masses using one uniform `u` in
/// `[0, 1)`. Returns `None` when every mass is `-inf` (or NaN).
pub fn sample_log_categorical(log_masses: &[f64], u: f64) -> Option<usize> {
    let max = log_masses
        .iter()
        .copied()
        .filter(|x| !x.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let mut total = 0.0;
    let mut last_positive = 0;
    for (i, &lm) in log_masses.iter().enumerate() {
        if lm.is_finite() || lm == f64::INFINITY {
            total += exp(lm - max);
            last_positive = i;
        }
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, &lm) in log_masses.iter().enumerate() {
        if lm.is_nan() || lm == f64::NEG_INFINITY {
            continue;
        }
        acc += exp(lm - max);
        if target < acc {
            return Some(i);
        }
    }
    Some(last_positive)
}

/// Logistic function, written to avoid overflow for large `|x|`.
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + log1p(exp(-x))
    } else {
        log1p(exp(x))
    }
}

/// `log C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    lgamma(n as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((n - k) as f64 + 1.0)
}

/// Log density of `Beta(a, b)` at `x` in (0, 1).
pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    lgamma(a + b) - lgamma(a) - lgamma(b) + (a - 1.0) * log(x) + (b - 1.0) * log1p(-x)
}

/// Log density of `Gamma(shape, rate)` at `x > 0`.
pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * log(rate) - lgamma(shape) + (shape - 1.0) * log(x) - rate * x
}

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linear-interpolation quantile (Hyndman & Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile of unsorted data.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}
