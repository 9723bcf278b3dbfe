//! Independent checks on back-transformed density curves.

use ndpc_core::ndp::NdpDraw;
use ndpc_core::summary::{density_curves, DensityCurves, DensityOptions};
use ndpc_core::Sequential;

/// Largest pointwise gap between the curve of one standard-normal atom and
/// the uniform density `1 / radius`.
pub fn uniform_gap(radius: f64) -> f64 {
    let d = NdpDraw {
        chain: 0,
        iteration: 1,
        k: 1,
        l: 1,
        zeta: vec![0, 0],
        pi_star: vec![1.0],
        w_star: vec![1.0],
        mu: vec![0.0],
        sigma_sq: vec![1.0],
        alpha: 1.0,
        rho: 1.0,
        log_joint: 0.0,
    };
    let c = density_curves(&[d], radius, &DensityOptions::default(), &Sequential).unwrap();
    c.clusters[0]
        .median
        .iter()
        .map(|v| (v - 1.0 / radius).abs())
        .fold(0.0, f64::max)
}

/// Integral over `(0, R)` of values on the interior grid by composite
/// Simpson on the grid, with linear extrapolation to the endpoints.
pub fn simpson_with_ends(values: &[f64], radius: f64) -> f64 {
    let g = values.len();
    let h = radius / (g + 1) as f64;
    // Even number of intervals for Simpson; the odd one out is a trapezoid.
    let intervals = g - 1;
    let even = intervals - intervals % 2;
    let mut s = 0.0;
    for i in (0..even).step_by(2) {
        s += h / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
    }
    if even < intervals {
        s += 0.5 * h * (values[g - 2] + values[g - 1]);
    }
    let left = (2.0 * values[0] - values[1]).max(0.0);
    let right = (2.0 * values[g - 1] - values[g - 2]).max(0.0);
    s + 0.5 * h * (left + values[0]) + 0.5 * h * (values[g - 1] + right)
}

/// Integral over `(0, R)` of values on the interior grid by the trapezoid
/// rule, panel by panel. The end panels `(0, r_1)` and `(r_G, R)` take the
/// nearest grid value at the open endpoint, the one extension under which a
/// constant curve integrates exactly.
pub fn trapezoid_with_ends(values: &[f64], radius: f64) -> f64 {
    let g = values.len();
    let h = radius / (g + 1) as f64;
    let mut points = vec![(0.0, values[0])];
    points.extend(values.iter().enumerate().map(|(i, &v)| (h * (i + 1) as f64, v)));
    points.push((radius, values[g - 1]));
    points.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

/// Largest `|integral - 1|` over the median curves under `rule`.
pub fn median_mass_gap(curves: &DensityCurves, rule: fn(&[f64], f64) -> f64) -> f64 {
    curves
        .clusters
        .iter()
        .map(|c| (rule(&c.median, curves.radius) - 1.0).abs())
        .fold(0.0, f64::max)
}
