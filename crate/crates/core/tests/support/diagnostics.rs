//! Calibration of the convergence diagnostics on sequences with a known
//! answer.

use ndpc_core::diagnostics::{raftery_lewis, split_rhat};
use ndpc_core::rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Calibration {
    /// Largest split R-hat over pairs of chains with the same law.
    pub same_max: f64,
    /// Smallest split R-hat over pairs whose means differ by 5 sd.
    pub offset_min: f64,
    pub rl_required: usize,
    /// `z^2 q (1 - q) / r^2` for independent draws.
    pub closed_form: f64,
}

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, 9, 0, 0);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn calibrate(pairs: u64) -> Calibration {
    let mut same_max = 0.0f64;
    let mut offset_min = f64::INFINITY;
    for p in 0..pairs {
        let a = normals(2 * p, 2000);
        let b = normals(2 * p + 1, 2000);
        same_max = same_max.max(split_rhat(&[a.clone(), b.clone()]).unwrap().value);
        let shifted: Vec<f64> = b.iter().map(|x| x + 5.0).collect();
        offset_min = offset_min.min(split_rhat(&[a, shifted]).unwrap().value);
    }
    let mut r = rng::stream(77, 9, 1, 0);
    let u: Vec<f64> = (0..50_000).map(|_| r.random()).collect();
    let (q, tol, s) = (0.025, 0.005, 0.95);
    let rl = raftery_lewis(&u, q, tol, s).unwrap();
    // Two-sided 95% normal quantile.
    let z: f64 = 1.959963984540054;
    Calibration {
        same_max,
        offset_min,
        rl_required: rl.n_required,
        closed_form: z * z * q * (1.0 - q) / (tol * tol),
    }
}
