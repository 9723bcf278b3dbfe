//! "Getting it right": marginal moments of (alpha, rho, mu*_11) under
//! forward simulation from the prior versus a Gibbs chain that alternates
//! a full sweep with regenerating the data from the current state.

use ndpc_core::diagnostics::effective_sample_size;
use ndpc_core::ndp::{GammaPrior, NdpChain, NdpConfig, NdpState, NixPrior};
use ndpc_core::rng;
use ndpc_core::{Sequential, TransformedPattern};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

pub const SUBJECTS: usize = 5;
pub const POINTS: usize = 3;

pub struct Comparison {
    pub name: &'static str,
    pub forward: f64,
    pub gibbs: f64,
    pub z: f64,
}

pub fn config() -> NdpConfig {
    NdpConfig {
        k_trunc: 3,
        l_trunc: 3,
        alpha_prior: GammaPrior::new(10.0, 10.0),
        rho_prior: GammaPrior::new(10.0, 10.0),
        // nu0 = 6 gives mu a finite-variance t marginal.
        base_measure: NixPrior {
            mu0: 0.0,
            kappa0: 1.0,
            nu0: 6.0,
            s0_sq: 1.0,
        },
        n_iter: 2,
        n_burnin: 0,
        thin: 1,
        seed: 17,
        ..NdpConfig::default()
    }
}

fn categorical(w: &[f64], r: &mut ChaCha8Rng) -> usize {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (i, &p) in w.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    w.len() - 1
}

fn weights(sticks: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    let mut w = Vec::new();
    for &s in sticks {
        w.push(s * rest);
        rest *= 1.0 - s;
    }
    w.push(rest);
    w
}

fn forward(cfg: &NdpConfig, r: &mut ChaCha8Rng) -> NdpState {
    let (k, l) = (cfg.k_trunc, cfg.l_trunc);
    let mut s = NdpState::blank(k, l, &[POINTS; SUBJECTS]);
    s.alpha = Gamma::new(cfg.alpha_prior.shape, 1.0 / cfg.alpha_prior.rate).unwrap().sample(r);
    s.rho = Gamma::new(cfg.rho_prior.shape, 1.0 / cfg.rho_prior.rate).unwrap().sample(r);
    let clamp = |u: f64| u.clamp(1e-300, 1.0 - 1e-16);
    for u in s.outer_sticks.iter_mut() {
        *u = clamp(Beta::new(1.0, s.alpha).unwrap().sample(r));
    }
    let rho = s.rho;
    for v in s.inner_sticks.iter_mut() {
        *v = clamp(Beta::new(1.0, rho).unwrap().sample(r));
    }
    s.refresh_weights();
    for i in 0..k * l {
        let (m, v) = cfg.base_measure.sample(r);
        s.mu[i] = m;
        s.sigma_sq[i] = v;
    }
    let pi = weights(&s.outer_sticks);
    for j in 0..SUBJECTS {
        s.zeta[j] = categorical(&pi, r);
        let w = weights(&s.inner_sticks[s.zeta[j] * (l - 1)..(s.zeta[j] + 1) * (l - 1)]);
        for i in 0..POINTS {
            s.xi[j][i] = categorical(&w, r);
        }
    }
    s
}

fn regenerate(s: &NdpState, r: &mut ChaCha8Rng) -> Vec<TransformedPattern> {
    (0..SUBJECTS)
        .map(|j| TransformedPattern {
            subject_id: format!("s{j}"),
            values: s.xi[j]
                .iter()
                .map(|&l| {
                    let a = s.idx(s.zeta[j], l);
                    Normal::new(s.mu[a], s.sigma_sq[a].sqrt()).unwrap().sample(r)
                })
                .collect(),
        })
        .collect()
}

fn stats(s: &NdpState) -> [f64; 3] {
    [s.alpha, s.rho, s.mu[0]]
}

pub fn run(samples: usize) -> Vec<Comparison> {
    let cfg = config();
    let mut r = rng::stream(cfg.seed, 1, 0, 0);
    let fwd: Vec<[f64; 3]> = (0..samples).map(|_| stats(&forward(&cfg, &mut r))).collect();

    let start = forward(&cfg, &mut r);
    let mut data = regenerate(&start, &mut r);
    let mut chain = NdpChain::new(&cfg, &data, 0).unwrap();
    *chain.state_mut() = start;
    let mut gibbs = Vec::with_capacity(samples);
    for _ in 0..samples {
        chain.sweep(&data, &Sequential).unwrap();
        chain.state().check_invariants().unwrap();
        data = regenerate(chain.state(), &mut r);
        gibbs.push(stats(chain.state()));
    }

    ["alpha", "rho", "mu_11"]
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let f: Vec<f64> = fwd.iter().map(|s| s[i]).collect();
            let g: Vec<f64> = gibbs.iter().map(|s| s[i]).collect();
            let (mf, vf) = mean_var(&f);
            let (mg, vg) = mean_var(&g);
            let ess = effective_sample_size(&[g.clone()]).unwrap().value;
            Comparison {
                name,
                forward: mf,
                gibbs: mg,
                z: (mf - mg) / (vf / f.len() as f64 + vg / ess).sqrt(),
            }
        })
        .collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
}
