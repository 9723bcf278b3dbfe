//! Full-conditional updates of the blocked Gibbs sampler.
//!
//! Indicator updates draw one categorical per subject (or per point) from
//! log-space masses. Their randomness comes from per-subject streams keyed
//! by `(seed, chain, iteration, subject)`, so an [`Executor`] may run the
//! subjects in any order or on any number of threads.

use alloc::vec;
use alloc::vec::Vec;

use libm::{log, log1p};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use super::nix::{NixPrior, SuffStats};
use super::state::NdpState;
use super::{GammaPrior, NdpError};
use crate::exec::Executor;
use crate::normal::LN_SQRT_2PI;
use crate::pattern::TransformedPattern;
use crate::rng::{self, Tag};
use crate::stats::sample_log_categorical;

/// Coordinates of one sweep's per-subject random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepKey {
    pub seed: u64,
    pub chain: u64,
    pub iteration: u64,
}

/// Per-atom constants for `log(w) + log N(x | mu, sigma_sq)`.
#[derive(Clone, Copy)]
struct AtomTerm {
    log_w: f64,
    mu: f64,
    half_prec: f64,
}

impl AtomTerm {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let d = x - self.mu;
        self.log_w - self.half_prec * d * d
    }
}

fn atom_table(state: &NdpState) -> Vec<AtomTerm> {
    (0..state.k * state.l)
        .map(|i| {
            let s2 = state.sigma_sq[i];
            AtomTerm {
                log_w: log(state.w_star[i]) - LN_SQRT_2PI - 0.5 * log(s2),
                mu: state.mu[i],
                half_prec: 0.5 / s2,
            }
        })
        .collect()
}

/// `log sum_l w_l N(x | theta_l)` for one cluster's row of atoms.
#[inline]
fn row_log_density(row: &[AtomTerm], x: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for t in row {
        let v = t.eval(x);
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut s = 0.0;
    for t in row {
        s += libm::exp(t.eval(x) - max);
    }
    max + log(s)
}

/// Redraws every subject's outer indicator from
/// `p(zeta_j = k) ∝ pi_k prod_i sum_l w_lk N(r'_ij | mu_lk, sigma_sq_lk)`.
pub fn update_zeta<E: Executor>(
    state: &mut NdpState,
    data: &[TransformedPattern],
    key: SweepKey,
    exec: &E,
) -> Result<(), NdpError> {
    let table = atom_table(state);
    let log_pi: Vec<f64> = state.pi_star.iter().map(|&p| log(p)).collect();
    let (k_trunc, l_trunc) = (state.k, state.l);
    let draws = exec.map_indexed(data.len(), |j| {
        let mut masses = vec![f64::NEG_INFINITY; k_trunc];
        for (k, mass) in masses.iter_mut().enumerate() {
            if log_pi[k] == f64::NEG_INFINITY {
                continue;
            }
            let row = &table[k * l_trunc..(k + 1) * l_trunc];
            let mut acc = log_pi[k];
            for &x in &data[j].values {
                acc += row_log_density(row, x);
            }
            *mass = acc;
        }
        let u: f64 = rng::tagged(key.seed, Tag::Zeta, key.chain, key.iteration, j as u64).random();
        sample_log_categorical(&masses, u).ok_or(NdpError::NumericalUnderflow { subject: j })
    });
    for (j, z) in draws.into_iter().enumerate() {
        state.zeta[j] = z?;
    }
    Ok(())
}

/// Redraws every point's inner indicator given its subject's cluster:
/// `p(xi_ij = l) ∝ w_{l,zeta_j} N(r'_ij | theta_{l,zeta_j})`.
pub fn update_xi<E: Executor>(
    state: &mut NdpState,
    data: &[TransformedPattern],
    key: SweepKey,
    exec: &E,
) -> Result<(), NdpError> {
    let table = atom_table(state);
    let l_trunc = state.l;
    let zeta = &state.zeta;
    let draws = exec.map_indexed(data.len(), |j| {
        let k = zeta[j];
        let row = &table[k * l_trunc..(k + 1) * l_trunc];
        let mut stream = rng::tagged(key.seed, Tag::Xi, key.chain, key.iteration, j as u64);
        let mut masses = vec![0.0; l_trunc];
        data[j]
            .values
            .iter()
            .map(|&x| {
                for (m, t) in masses.iter_mut().zip(row) {
                    *m = t.eval(x);
                }
                let u: f64 = stream.random();
                sample_log_categorical(&masses, u).ok_or(NdpError::NumericalUnderflow { subject: j })
            })
            .collect::<Result<Vec<usize>, NdpError>>()
    });
    for (j, xs) in draws.into_iter().enumerate() {
        state.xi[j] = xs?;
    }
    Ok(())
}

const STICK_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

fn draw_stick<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let u: f64 = Beta::new(a, b).expect("positive beta parameters").sample(rng);
    u.clamp(f64::MIN_POSITIVE, STICK_MAX)
}

/// `u_k ~ Beta(1 + m_k, alpha + sum_{s>k} m_s)` for `k < K`, then
/// recomputes `pi_star`.
pub fn update_outer_sticks<R: Rng + ?Sized>(state: &mut NdpState, rng: &mut R) {
    let m = state.cluster_counts();
    let mut tail: usize = m.iter().sum();
    for k in 0..state.k - 1 {
        tail -= m[k];
        state.outer_sticks[k] = draw_stick(1.0 + m[k] as f64, state.alpha + tail as f64, rng);
    }
    super::state::stick_break_into(&state.outer_sticks, &mut state.pi_star);
}

/// `v_kl ~ Beta(1 + n_kl, rho + sum_{s>l} n_ks)` for `l < L`, then
/// recomputes every `w_star` row.
pub fn update_inner_sticks<R: Rng + ?Sized>(state: &mut NdpState, rng: &mut R) {
    let n = state.component_counts();
    let l_trunc = state.l;
    for k in 0..state.k {
        let row = &n[k * l_trunc..(k + 1) * l_trunc];
        let mut tail: usize = row.iter().sum();
        for l in 0..l_trunc - 1 {
            tail -= row[l];
            state.inner_sticks[k * (l_trunc - 1) + l] = draw_stick(1.0 + row[l] as f64, state.rho + tail as f64, rng);
        }
    }
    state.refresh_inner_weights();
}

/// Draws each atom from its conjugate posterior given the points currently
/// assigned to it; components with no points get a fresh prior draw.
pub fn update_atoms<R: Rng + ?Sized>(
    state: &mut NdpState,
    data: &[TransformedPattern],
    prior: &NixPrior,
    rng: &mut R,
) {
    let mut stats = vec![SuffStats::default(); state.k * state.l];
    for (j, pattern) in data.iter().enumerate() {
        let k = state.zeta[j];
        for (&x, &l) in pattern.values.iter().zip(&state.xi[j]) {
            stats[k * state.l + l].push(x);
        }
    }
    for (i, st) in stats.iter().enumerate() {
        let (mu, s2) = prior.posterior(st).sample(rng);
        state.mu[i] = mu;
        state.sigma_sq[i] = s2;
    }
}

/// Conjugate concentration updates under truncated stick-breaking:
/// `alpha ~ Gamma(a + K - 1, b - sum_k log(1 - u_k))` and
/// `rho ~ Gamma(a + K (L - 1), b - sum_kl log(1 - v_kl))`.
pub fn update_concentrations<R: Rng + ?Sized>(
    state: &mut NdpState,
    alpha_prior: &GammaPrior,
    rho_prior: &GammaPrior,
    rng: &mut R,
) {
    let outer: f64 = state.outer_sticks.iter().map(|&u| -log1p(-u)).sum();
    let inner: f64 = state.inner_sticks.iter().map(|&v| -log1p(-v)).sum();
    let shape_a = alpha_prior.shape + state.outer_sticks.len() as f64;
    let shape_r = rho_prior.shape + state.inner_sticks.len() as f64;
    state.alpha = draw_gamma(shape_a, alpha_prior.rate + outer, rng);
    state.rho = draw_gamma(shape_r, rho_prior.rate + inner, rng);
}

fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng);
    g.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use alloc::string::String;

    fn tp(values: Vec<f64>) -> TransformedPattern {
        TransformedPattern {
            subject_id: String::from("s"),
            values,
        }
    }

    fn key(iteration: u64) -> SweepKey {
        SweepKey {
            seed: 11,
            chain: 0,
            iteration,
        }
    }

    #[test]
    fn zeta_follows_prior_weights_when_atoms_coincide() {
        let data = vec![tp(vec![0.3, -0.2])];
        let mut s = NdpState::blank(2, 2, &[2]);
        s.outer_sticks = vec![0.7];
        s.refresh_weights();
        let n = 10_000;
        let mut first = 0;
        for it in 0..n {
            update_zeta(&mut s, &data, key(it), &Sequential).unwrap();
            first += (s.zeta[0] == 0) as usize;
        }
        assert!((first as f64 / n as f64 - 0.7).abs() < 0.02);
    }

    #[test]
    fn zeta_picks_matching_cluster() {
        let data = vec![tp(vec![-3.01, -2.98, -3.0])];
        let mut s = NdpState::blank(2, 2, &[3]);
        for l in 0..2 {
            s.mu[l] = -3.0;
            s.sigma_sq[l] = 0.01;
            s.mu[2 + l] = 3.0;
            s.sigma_sq[2 + l] = 0.01;
        }
        let mut hits = 0;
        for it in 0..2000 {
            update_zeta(&mut s, &data, key(it), &Sequential).unwrap();
            hits += (s.zeta[0] == 0) as usize;
        }
        assert_eq!(hits, 2000);
    }

    #[test]
    fn single_cluster_truncation_is_deterministic() {
        // K = 1 is below the sampler's configured minimum but the update
        // itself is well defined.
        let data = vec![tp(vec![0.1]), tp(vec![2.0, 1.0])];
        let mut s = NdpState::blank(1, 1, &[1, 2]);
        update_zeta(&mut s, &data, key(0), &Sequential).unwrap();
        update_xi(&mut s, &data, key(0), &Sequential).unwrap();
        assert_eq!(s.zeta, vec![0, 0]);
        assert_eq!(s.xi, vec![vec![0], vec![0, 0]]);
    }

    #[test]
    fn xi_follows_weights_when_atoms_coincide() {
        let data = vec![tp(vec![0.4])];
        let mut s = NdpState::blank(2, 2, &[1]);
        s.inner_sticks = vec![0.9, 0.5];
        s.refresh_weights();
        let n = 10_000;
        let mut first = 0;
        for it in 0..n {
            update_xi(&mut s, &data, key(it), &Sequential).unwrap();
            first += (s.xi[0][0] == 0) as usize;
        }
        assert!((first as f64 / n as f64 - 0.9).abs() < 0.02);
    }

    #[test]
    fn xi_picks_matching_component() {
        let data = vec![tp(vec![0.0])];
        let mut s = NdpState::blank(2, 2, &[1]);
        s.mu[0] = 0.0;
        s.mu[1] = 10.0;
        s.sigma_sq[0] = 0.01;
        s.sigma_sq[1] = 0.01;
        for it in 0..2000 {
            update_xi(&mut s, &data, key(it), &Sequential).unwrap();
            assert_eq!(s.xi[0][0], 0);
        }
    }

    #[test]
    fn corrupted_atoms_underflow() {
        let data = vec![tp(vec![0.0])];
        let mut s = NdpState::blank(2, 2, &[1]);
        s.sigma_sq.iter_mut().for_each(|v| *v = f64::NAN);
        assert!(matches!(
            update_zeta(&mut s, &data, key(0), &Sequential),
            Err(NdpError::NumericalUnderflow { subject: 0 })
        ));
    }

    fn stick_mean(counts: &[usize], conc: f64, outer: bool) -> f64 {
        let k = counts.len();
        let sizes: Vec<usize> = if outer { vec![0; counts.iter().sum()] } else { vec![counts.iter().sum()] };
        let mut s = if outer { NdpState::blank(k, 2, &sizes) } else { NdpState::blank(1, k, &sizes) };
        if outer {
            s.zeta = counts.iter().enumerate().flat_map(|(k, &c)| vec![k; c]).collect();
            s.alpha = conc;
        } else {
            s.xi = vec![counts.iter().enumerate().flat_map(|(l, &c)| vec![l; c]).collect()];
            s.rho = conc;
        }
        let mut r = rng::stream(5, 5, 5, 5);
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            if outer {
                update_outer_sticks(&mut s, &mut r);
                acc += s.outer_sticks[0];
            } else {
                update_inner_sticks(&mut s, &mut r);
                acc += s.inner_sticks[0];
            }
        }
        acc / n as f64
    }

    #[test]
    fn outer_stick_means() {
        // No subjects at all: prior Beta(1, 1).
        let mut s = NdpState::blank(3, 2, &[]);
        s.alpha = 1.0;
        let mut r = rng::stream(1, 1, 1, 1);
        let mean: f64 = (0..10_000)
            .map(|_| {
                update_outer_sticks(&mut s, &mut r);
                s.outer_sticks[0]
            })
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02);
        assert!((stick_mean(&[10, 0, 0], 1.0, true) - 11.0 / 12.0).abs() < 0.02);
        assert!((stick_mean(&[5, 5], 2.0, true) - 6.0 / 13.0).abs() < 0.02);
    }

    #[test]
    fn inner_stick_means() {
        assert!((stick_mean(&[0, 0, 0], 1.0, false) - 0.5).abs() < 0.02);
        assert!((stick_mean(&[10, 0, 0], 1.0, false) - 11.0 / 12.0).abs() < 0.02);
        assert!((stick_mean(&[5, 5], 2.0, false) - 6.0 / 13.0).abs() < 0.02);
    }

    #[test]
    fn weights_stay_normalised_after_updates() {
        let mut s = NdpState::blank(4, 3, &[3, 2]);
        s.zeta = vec![1, 3];
        s.xi = vec![vec![0, 2, 2], vec![1, 1]];
        let mut r = rng::stream(2, 2, 2, 2);
        for _ in 0..100 {
            update_outer_sticks(&mut s, &mut r);
            update_inner_sticks(&mut s, &mut r);
            s.check_invariants().unwrap();
        }
    }

    #[test]
    fn atoms_concentrate_on_data() {
        let mut r = rng::stream(3, 3, 3, 3);
        let values: Vec<f64> = (0..1000)
            .map(|_| -1.0 + 0.5 * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut r))
            .collect();
        let data = vec![tp(values)];
        let mut s = NdpState::blank(2, 2, &[1000]);
        let prior = NixPrior::default();
        let mut acc = 0.0;
        for _ in 0..2000 {
            update_atoms(&mut s, &data, &prior, &mut r);
            acc += s.mu[0];
            assert!(s.sigma_sq.iter().all(|&v| v > 0.0));
        }
        assert!((acc / 2000.0 + 1.0).abs() < 0.05);
    }

    #[test]
    fn empty_components_draw_from_prior() {
        let mut s = NdpState::blank(2, 2, &[]);
        let mut r = rng::stream(4, 4, 4, 4);
        let prior = NixPrior::default();
        let mut mus = Vec::new();
        for _ in 0..10_000 {
            update_atoms(&mut s, &[], &prior, &mut r);
            mus.push(s.mu[3]);
        }
        // The prior marginal of mu is Cauchy, so compare the median.
        mus.sort_by(f64::total_cmp);
        assert!(mus[5000].abs() < 0.05);
    }

    #[test]
    fn concentration_examples() {
        let prior = GammaPrior::new(10.0, 10.0);
        let mut r = rng::stream(6, 6, 6, 6);
        // All outer sticks near zero: Gamma(44, ~10).
        let mut s = NdpState::blank(35, 2, &[]);
        s.outer_sticks.iter_mut().for_each(|u| *u = 1e-12);
        s.inner_sticks.iter_mut().for_each(|v| *v = 1e-12);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| {
                update_concentrations(&mut s, &prior, &prior, &mut r);
                s.alpha
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 4.4).abs() < 0.05, "{mean}");

        let mut s = NdpState::blank(2, 2, &[]);
        s.outer_sticks = vec![1.0 - libm::exp(-1.0)];
        let mean: f64 = (0..n)
            .map(|_| {
                update_concentrations(&mut s, &prior, &prior, &mut r);
                s.alpha
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn concentration_prior_recovery() {
        // No data: alternating sticks | alpha and alpha | sticks leaves the
        // Gamma(10, 10) prior invariant.
        let prior = GammaPrior::new(10.0, 10.0);
        let mut s = NdpState::blank(5, 3, &[]);
        let mut r = rng::stream(8, 8, 8, 8);
        let n = 10_000;
        let (mut sa, mut sr) = (0.0, 0.0);
        for _ in 0..n {
            update_outer_sticks(&mut s, &mut r);
            update_inner_sticks(&mut s, &mut r);
            update_concentrations(&mut s, &prior, &prior, &mut r);
            sa += s.alpha;
            sr += s.rho;
        }
        assert!((sa / n as f64 - 1.0).abs() < 0.05);
        assert!((sr / n as f64 - 1.0).abs() < 0.05);
    }
}
