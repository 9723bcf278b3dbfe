use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};

use super::SummaryError;
use crate::exec::Executor;
use crate::ndp::NdpDraw;
use crate::normal::{self, LN_SQRT_2PI};
use crate::stats::{log_sum_exp, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityOptions {
    /// Interior grid points on `(0, R)`.
    pub grid_size: usize,
    /// A cluster gets a curve when it is occupied in at least this fraction
    /// of draws.
    pub min_occupancy: f64,
    /// Median curves closer than this in L2 distance trigger a warning.
    pub degeneracy_l2: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            grid_size: 512,
            min_occupancy: 0.5,
            degeneracy_l2: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterCurve {
    /// 1-based, ordered by where the median curve peaks.
    pub label: usize,
    /// Zero-based cluster index in the draws.
    pub source: usize,
    pub occupancy: f64,
    pub median: Vec<f64>,
    pub q025: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
    pub q975: Vec<f64>,
    pub weight_median: f64,
    pub weight_q25: f64,
    pub weight_q75: f64,
}

impl ClusterCurve {
    pub fn weight_iqr(&self) -> f64 {
        self.weight_q75 - self.weight_q25
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DensityWarning {
    /// Two median curves are nearly identical.
    NearDuplicate { a: usize, b: usize, l2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityCurves {
    pub radius: f64,
    pub grid: Vec<f64>,
    pub clusters: Vec<ClusterCurve>,
    pub warnings: Vec<DensityWarning>,
}

/// Integral over `(0, R)` of values on the interior grid `R*g/(G+1)`:
/// trapezoids between grid points plus a flat cell of width `h` at each
/// end.
pub fn extended_trapezoid(values: &[f64], h: f64) -> f64 {
    match values {
        [] => 0.0,
        [only] => 2.0 * h * only,
        [first, .., last] => h * (values.iter().sum::<f64>() + 0.5 * (first + last)),
    }
}

/// Per-draw cluster densities on the distance scale, renormalized to
/// integrate to 1, summarized by pointwise quantiles. Envelopes are scaled
/// together so the median curve integrates to 1.
pub fn density_curves<E: Executor>(
    draws: &[NdpDraw],
    radius: f64,
    opts: &DensityOptions,
    exec: &E,
) -> Result<DensityCurves, SummaryError> {
    let first = draws.first().ok_or(SummaryError::NoDraws)?;
    if opts.grid_size < 2 {
        return Err(SummaryError::InvalidGrid);
    }
    let g = opts.grid_size;
    let h = radius / (g + 1) as f64;
    let grid: Vec<f64> = (1..=g).map(|i| h * i as f64).collect();
    let t: Vec<f64> = grid.iter().map(|&r| normal::quantile(r / radius)).collect();
    // log(R * phi(t)), the Jacobian of the probit map.
    let ln_jac: Vec<f64> = t.iter().map(|&x| log(radius) - LN_SQRT_2PI - 0.5 * x * x).collect();

    let k_trunc = first.k;
    let s = draws.len();
    let mut occupancy = vec![0usize; k_trunc];
    for d in draws {
        let mut seen = vec![false; k_trunc];
        for &z in &d.zeta {
            seen[z] = true;
        }
        for (o, &hit) in occupancy.iter_mut().zip(&seen) {
            *o += hit as usize;
        }
    }
    let mut included: Vec<usize> = (0..k_trunc)
        .filter(|&k| occupancy[k] as f64 >= opts.min_occupancy * s as f64)
        .collect();
    if included.is_empty() {
        let best = (0..k_trunc).fold(0, |b, k| if occupancy[k] > occupancy[b] { k } else { b });
        included.push(best);
    }

    let mut clusters = Vec::with_capacity(included.len());
    for &k in &included {
        let curves: Vec<Vec<f64>> = exec.map_indexed(s, |i| {
            let d = &draws[i];
            let mut row = vec![0.0; d.l];
            let mut f: Vec<f64> = t
                .iter()
                .zip(&ln_jac)
                .map(|(&x, &lj)| {
                    for (l, r) in row.iter_mut().enumerate() {
                        let j = k * d.l + l;
                        *r = log(d.w_star[j]) + normal::ln_pdf(x, d.mu[j], d.sigma_sq[j]);
                    }
                    exp(log_sum_exp(&row) - lj)
                })
                .collect();
            let total = extended_trapezoid(&f, h);
            if total > 0.0 && total.is_finite() {
                for v in f.iter_mut() {
                    *v /= total;
                }
            }
            f
        });
        let mut env = [vec![0.0; g], vec![0.0; g], vec![0.0; g], vec![0.0; g], vec![0.0; g]];
        let mut column = vec![0.0; s];
        for gi in 0..g {
            for (c, curve) in column.iter_mut().zip(&curves) {
                *c = curve[gi];
            }
            column.sort_by(f64::total_cmp);
            for (e, p) in env.iter_mut().zip([0.025, 0.25, 0.5, 0.75, 0.975]) {
                e[gi] = quantile_sorted(&column, p);
            }
        }
        let scale = extended_trapezoid(&env[2], h);
        if scale > 0.0 && scale.is_finite() {
            for e in env.iter_mut() {
                for v in e.iter_mut() {
                    *v /= scale;
                }
            }
        }
        let mut weights: Vec<f64> = draws.iter().map(|d| d.pi_star[k]).collect();
        weights.sort_by(f64::total_cmp);
        let [q025, q25, median, q75, q975] = env;
        clusters.push(ClusterCurve {
            label: 0,
            source: k,
            occupancy: occupancy[k] as f64 / s as f64,
            median,
            q025,
            q25,
            q75,
            q975,
            weight_median: quantile_sorted(&weights, 0.5),
            weight_q25: quantile_sorted(&weights, 0.25),
            weight_q75: quantile_sorted(&weights, 0.75),
        });
    }

    let peak = |c: &ClusterCurve| (0..g).fold(0, |b, i| if c.median[i] > c.median[b] { i } else { b });
    clusters.sort_by_key(|c| (peak(c), c.source));
    for (i, c) in clusters.iter_mut().enumerate() {
        c.label = i + 1;
    }

    let mut warnings = Vec::new();
    for a in 0..clusters.len() {
        for b in a + 1..clusters.len() {
            let sq: Vec<f64> = clusters[a]
                .median
                .iter()
                .zip(&clusters[b].median)
                .map(|(x, y)| (x - y) * (x - y))
                .collect();
            let l2 = sqrt(extended_trapezoid(&sq, h));
            if l2 < opts.degeneracy_l2 {
                warnings.push(DensityWarning::NearDuplicate {
                    a: clusters[a].label,
                    b: clusters[b].label,
                    l2,
                });
            }
        }
    }

    Ok(DensityCurves {
        radius,
        grid,
        clusters,
        warnings,
    })
}
