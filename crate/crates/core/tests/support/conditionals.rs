//! Brute-force checks of each Gibbs full conditional on a frozen instance
//! with K = 2, L = 2 and three points. Oracles integrate prior times
//! likelihood numerically and never call the crate's conjugate formulas.

use libm::{exp, lgamma, log};
use ndpc_core::ndp::{self, NdpState, NixPrior, SweepKey};
use ndpc_core::rng;
use ndpc_core::{Sequential, TransformedPattern};

pub const DRAWS: usize = 50_000;
pub const BINS: usize = 20;

pub struct Check {
    pub name: String,
    pub tv: f64,
}

fn data() -> Vec<TransformedPattern> {
    vec![
        TransformedPattern {
            subject_id: "a".into(),
            values: vec![-0.8, 0.4],
        },
        TransformedPattern {
            subject_id: "b".into(),
            values: vec![1.1],
        },
    ]
}

fn frozen() -> NdpState {
    let mut s = NdpState::blank(2, 2, &[2, 1]);
    s.outer_sticks = vec![0.6];
    s.inner_sticks = vec![0.3, 0.7];
    s.refresh_weights();
    s.mu = vec![-1.0, 0.5, 0.2, 1.5];
    s.sigma_sq = vec![0.5, 1.0, 0.8, 0.3];
    s.zeta = vec![0, 1];
    s.xi = vec![vec![0, 0], vec![1]];
    s.alpha = 1.3;
    s.rho = 0.7;
    s
}

fn prior() -> NixPrior {
    NixPrior::default()
}

fn normal_pdf(x: f64, m: f64, v: f64) -> f64 {
    exp(-(x - m) * (x - m) / (2.0 * v)) / (2.0 * std::f64::consts::PI * v).sqrt()
}

fn tv(p: &[f64], counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    0.5 * p.iter().zip(counts).map(|(p, &c)| (p - c as f64 / n as f64).abs()).sum::<f64>()
}

fn sticks_to_weights(sticks: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    let mut w = Vec::new();
    for &s in sticks {
        w.push(s * rest);
        rest *= 1.0 - s;
    }
    w.push(rest);
    w
}

/// Composite Simpson rule over `[a, b]` with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Bin probabilities of a density known up to a constant on `(lo, hi)`
/// with equal-width bins; `total` is its integral over the whole support.
fn binned<F: Fn(f64) -> f64>(f: &F, edges: &[f64], total: f64) -> Vec<f64> {
    edges.windows(2).map(|w| simpson(f, w[0], w[1], 200) / total).collect()
}

fn histogram(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let mut c = vec![0; edges.len() - 1];
    for &v in values {
        if let Some(b) = edges.windows(2).position(|w| v >= w[0] && v < w[1]) {
            c[b] += 1;
        }
    }
    c
}

fn check_categorical(name: &str, oracle: &[Vec<f64>], draws: &[Vec<usize>]) -> Check {
    let mut worst: f64 = 0.0;
    for (i, p) in oracle.iter().enumerate() {
        let mut counts = vec![0; p.len()];
        for d in draws {
            counts[d[i]] += 1;
        }
        worst = worst.max(tv(p, &counts));
    }
    Check { name: name.into(), tv: worst }
}

pub fn zeta() -> Check {
    let data = data();
    let s0 = frozen();
    let pi = sticks_to_weights(&s0.outer_sticks);
    let oracle: Vec<Vec<f64>> = data
        .iter()
        .map(|p| {
            let m: Vec<f64> = (0..2)
                .map(|k| {
                    let w = sticks_to_weights(&s0.inner_sticks[k..k + 1]);
                    pi[k] * p
                        .values
                        .iter()
                        .map(|&x| (0..2).map(|l| w[l] * normal_pdf(x, s0.mu[2 * k + l], s0.sigma_sq[2 * k + l])).sum::<f64>())
                        .product::<f64>()
                })
                .collect();
            let t: f64 = m.iter().sum();
            m.iter().map(|v| v / t).collect()
        })
        .collect();
    let mut s = s0.clone();
    let draws: Vec<Vec<usize>> = (0..DRAWS as u64)
        .map(|it| {
            let key = SweepKey { seed: 3, chain: 0, iteration: it };
            ndp::update_zeta(&mut s, &data, key, &Sequential).unwrap();
            s.zeta.clone()
        })
        .collect();
    check_categorical("zeta", &oracle, &draws)
}

pub fn xi() -> Check {
    let data = data();
    let s0 = frozen();
    let mut oracle = Vec::new();
    for (j, p) in data.iter().enumerate() {
        let k = s0.zeta[j];
        let w = sticks_to_weights(&s0.inner_sticks[k..k + 1]);
        for &x in &p.values {
            let m: Vec<f64> = (0..2).map(|l| w[l] * normal_pdf(x, s0.mu[2 * k + l], s0.sigma_sq[2 * k + l])).collect();
            let t: f64 = m.iter().sum();
            oracle.push(m.iter().map(|v| v / t).collect::<Vec<_>>());
        }
    }
    let mut s = s0.clone();
    let draws: Vec<Vec<usize>> = (0..DRAWS as u64)
        .map(|it| {
            let key = SweepKey { seed: 4, chain: 0, iteration: it };
            ndp::update_xi(&mut s, &data, key, &Sequential).unwrap();
            s.xi.iter().flatten().copied().collect()
        })
        .collect();
    check_categorical("xi", &oracle, &draws)
}

fn unit_edges() -> Vec<f64> {
    (0..=BINS).map(|i| i as f64 / BINS as f64).collect()
}

fn ln_beta_density(u: f64, a: f64, b: f64) -> f64 {
    lgamma(a + b) - lgamma(a) - lgamma(b) + (a - 1.0) * log(u) + (b - 1.0) * log(1.0 - u)
}

/// Stick `u` with prior Beta(1, conc) and the likelihood of the
/// indicators that its weights generate.
fn stick_check(name: &str, conc: f64, labels: &[usize], draws: &[f64]) -> Check {
    let f = |u: f64| {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let w = sticks_to_weights(&[u]);
        exp(ln_beta_density(u, 1.0, conc) + labels.iter().map(|&k| log(w[k])).sum::<f64>())
    };
    let edges = unit_edges();
    let total = simpson(f, 0.0, 1.0, 20_000);
    let p = binned(&f, &edges, total);
    Check {
        name: name.into(),
        tv: tv(&p, &histogram(draws, &edges)),
    }
}

pub fn outer_sticks() -> Check {
    let s0 = frozen();
    let mut s = s0.clone();
    let mut r = rng::stream(5, 0, 0, 0);
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| {
            ndp::update_outer_sticks(&mut s, &mut r);
            s.outer_sticks[0]
        })
        .collect();
    stick_check("outer sticks", s0.alpha, &s0.zeta, &draws)
}

pub fn inner_sticks() -> Vec<Check> {
    let s0 = frozen();
    let mut s = s0.clone();
    let mut r = rng::stream(6, 0, 0, 0);
    let mut draws = vec![Vec::new(), Vec::new()];
    for _ in 0..DRAWS {
        ndp::update_inner_sticks(&mut s, &mut r);
        draws[0].push(s.inner_sticks[0]);
        draws[1].push(s.inner_sticks[1]);
    }
    (0..2)
        .map(|k| {
            let labels: Vec<usize> = s0
                .zeta
                .iter()
                .zip(&s0.xi)
                .filter(|(&z, _)| z == k)
                .flat_map(|(_, xs)| xs.iter().copied())
                .collect();
            stick_check(&format!("inner sticks row {k}"), s0.rho, &labels, &draws[k])
        })
        .collect()
}

/// Unnormalized marginal posterior of `mu` for an atom holding `points`:
/// prior N(mu0, s2 / kappa0) x Inv-chi^2(nu0, s0^2) times the normal
/// likelihood, with `s2` integrated out on a log grid.
fn mu_marginal(points: &[f64], pr: NixPrior) -> impl Fn(f64) -> f64 + '_ {
    move |mu: f64| {
        let g = |t: f64| {
            let s2 = exp(t);
            let half = pr.nu0 / 2.0;
            let ln_ichi = half * log(half * pr.s0_sq) - lgamma(half) - (half + 1.0) * log(s2) - half * pr.s0_sq / s2;
            let ln_mu = log(normal_pdf(mu, pr.mu0, s2 / pr.kappa0));
            let ln_lik: f64 = points.iter().map(|&y| log(normal_pdf(y, mu, s2))).sum();
            exp(ln_ichi + ln_mu + ln_lik + t)
        };
        simpson(g, -25.0, 25.0, 1000)
    }
}

/// Integral over `(a, b)`, either end possibly infinite, through
/// `mu = tan(t)`.
fn tan_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let edge = std::f64::consts::FRAC_PI_2 - 1e-9;
    let (ta, tb) = (a.atan().max(-edge), b.atan().min(edge));
    simpson(|t| f(t.tan()) / (t.cos() * t.cos()), ta, tb, 20_000)
}

fn whole_line<F: Fn(f64) -> f64>(f: F) -> f64 {
    tan_integral(f, f64::NEG_INFINITY, f64::INFINITY)
}

/// `|posterior mean of mu by conjugacy - by grid integration|`.
pub fn atom_mean_gap(points: &[f64]) -> f64 {
    let pr = prior();
    let f = mu_marginal(points, pr);
    let z = whole_line(&f);
    let m = whole_line(|mu| mu * f(mu)) / z;
    let stats = ndp::SuffStats::from_slice(points);
    (pr.posterior(&stats).mean_mu() - m).abs()
}

pub fn atoms() -> Check {
    let data = data();
    let s0 = frozen();
    let pr = prior();
    let points = [data[0].values[0], data[0].values[1]];
    let mut s = s0.clone();
    let mut r = rng::stream(7, 0, 0, 0);
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| {
            ndp::update_atoms(&mut s, &data, &pr, &mut r);
            s.mu[0]
        })
        .collect();
    let f = mu_marginal(&points, pr);
    let total = whole_line(&f);
    let (lo, hi) = (-2.5, 2.1);
    let mut edges: Vec<f64> = (0..=BINS - 2).map(|i| lo + (hi - lo) * i as f64 / (BINS - 2) as f64).collect();
    let mut p = binned(&f, &edges, total);
    p.insert(0, tan_integral(&f, f64::NEG_INFINITY, lo) / total);
    p.push(tan_integral(&f, hi, f64::INFINITY) / total);
    edges.insert(0, f64::NEG_INFINITY);
    edges.push(f64::INFINITY);
    Check {
        name: "atoms".into(),
        tv: tv(&p, &histogram(&draws, &edges)),
    }
}

fn gamma_check(name: &str, prior: (f64, f64), sticks: &[f64], draws: &[f64]) -> Check {
    let f = |a: f64| {
        if a <= 0.0 {
            return 0.0;
        }
        let ln_prior = prior.0 * log(prior.1) - lgamma(prior.0) + (prior.0 - 1.0) * log(a) - prior.1 * a;
        exp(ln_prior + sticks.iter().map(|&u| ln_beta_density(u, 1.0, a)).sum::<f64>())
    };
    let total = simpson(f, 0.0, 60.0, 60_000);
    let hi = 3.0;
    let mut edges: Vec<f64> = (0..BINS).map(|i| hi * i as f64 / (BINS - 1) as f64).collect();
    let mut p = binned(&f, &edges, total);
    let inside: f64 = p.iter().sum();
    p.push(1.0 - inside);
    edges.push(f64::INFINITY);
    Check {
        name: name.into(),
        tv: tv(&p, &histogram(draws, &edges)),
    }
}

pub fn concentrations() -> Vec<Check> {
    let s0 = frozen();
    let mut s = s0.clone();
    let mut r = rng::stream(8, 0, 0, 0);
    let g = ndp::GammaPrior::new(10.0, 10.0);
    let mut alpha = Vec::new();
    let mut rho = Vec::new();
    for _ in 0..DRAWS {
        ndp::update_concentrations(&mut s, &g, &g, &mut r);
        alpha.push(s.alpha);
        rho.push(s.rho);
    }
    vec![
        gamma_check("alpha", (10.0, 10.0), &s0.outer_sticks, &alpha),
        gamma_check("rho", (10.0, 10.0), &s0.inner_sticks, &rho),
    ]
}

pub fn all() -> Vec<Check> {
    let mut v = vec![zeta(), xi(), outer_sticks()];
    v.extend(inner_sticks());
    v.push(atoms());
    v.extend(concentrations());
    v
}
