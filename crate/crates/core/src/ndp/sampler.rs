use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::log;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use sha2::{Digest, Sha256};

use super::state::NdpState;
use super::updates::{self, SweepKey};
use super::{NdpConfig, NdpError, OuterWeights};
use crate::exec::{Executor, Sequential};
use crate::normal::LN_SQRT_2PI;
use crate::pattern::{probit_transform, PointPattern, TransformedPattern};
use crate::rng::{self, Tag};
use crate::stats::{ln_beta_pdf, ln_gamma_pdf, log_sum_exp};

/// One retained posterior draw. Inner indicators and raw sticks are not
/// kept; the weights carry the same information for summaries.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NdpDraw {
    pub chain: u32,
    pub iteration: u64,
    pub k: usize,
    pub l: usize,
    pub zeta: Vec<usize>,
    pub pi_star: Vec<f64>,
    /// Row-major `K x L`.
    pub w_star: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub alpha: f64,
    pub rho: f64,
    /// Log joint density with inner indicators summed out.
    pub log_joint: f64,
}

impl NdpDraw {
    /// Transformed-scale mixture density of cluster `k` at `x`.
    pub fn cluster_density(&self, k: usize, x: f64) -> f64 {
        (0..self.l)
            .map(|l| {
                let i = k * self.l + l;
                let s2 = self.sigma_sq[i];
                let d = x - self.mu[i];
                self.w_star[i] * libm::exp(-LN_SQRT_2PI - 0.5 * log(s2) - 0.5 * d * d / s2)
            })
            .sum()
    }

    pub fn is_occupied(&self, k: usize) -> bool {
        self.zeta.contains(&k)
    }

    pub fn check_invariants(&self) -> Result<(), NdpError> {
        let err = |m: &str| Err(NdpError::Invariant(String::from(m)));
        if self.pi_star.iter().sum::<f64>() != 1.0 {
            return err("outer weights do not sum to 1");
        }
        for k in 0..self.k {
            if self.w_star[k * self.l..(k + 1) * self.l].iter().sum::<f64>() != 1.0 {
                return err("inner weights do not sum to 1");
            }
        }
        if self.sigma_sq.iter().any(|&v| !(v > 0.0)) {
            return err("non-positive variance");
        }
        if self.zeta.iter().any(|&z| z >= self.k) {
            return err("indicator out of range");
        }
        if !self.log_joint.is_finite() {
            return err("non-finite log joint");
        }
        Ok(())
    }
}

/// Warnings collected during a run.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunReport {
    /// Clusters whose location trace jumps abruptly (possible label switch).
    pub label_switch_suspects: Vec<usize>,
    /// Subjects with repeated distances.
    pub subjects_with_ties: Vec<String>,
}

/// Retained draws of one or more chains over the same data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorDraws {
    pub config: NdpConfig,
    /// Hex SHA-256 of the input patterns.
    pub data_digest: String,
    pub subject_ids: Vec<String>,
    pub radius: f64,
    pub draws: Vec<NdpDraw>,
    pub report: RunReport,
}

impl PosteriorDraws {
    /// Concatenates chains run on identical data, in the given order.
    pub fn merge(mut parts: Vec<PosteriorDraws>) -> Option<PosteriorDraws> {
        if parts.is_empty() {
            return None;
        }
        let mut first = parts.remove(0);
        for p in parts {
            if p.data_digest != first.data_digest {
                return None;
            }
            first.draws.extend(p.draws);
            for k in p.report.label_switch_suspects {
                if !first.report.label_switch_suspects.contains(&k) {
                    first.report.label_switch_suspects.push(k);
                }
            }
        }
        first.report.label_switch_suspects.sort_unstable();
        Some(first)
    }

    pub fn chains(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.draws.iter().map(|d| d.chain).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn chain_draws(&self, chain: u32) -> Vec<&NdpDraw> {
        self.draws.iter().filter(|d| d.chain == chain).collect()
    }
}

/// SHA-256 over subject ids, radii and distance bit patterns.
pub fn data_digest(patterns: &[PointPattern]) -> String {
    let mut h = Sha256::new();
    for p in patterns {
        h.update(p.subject_id.as_bytes());
        h.update([0u8]);
        h.update(p.radius.to_le_bytes());
        h.update((p.distances.len() as u64).to_le_bytes());
        for d in &p.distances {
            h.update(d.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// A single blocked-Gibbs chain.
pub struct NdpChain {
    config: NdpConfig,
    chain: u64,
    state: NdpState,
    rng: ChaCha8Rng,
    iteration: u64,
}

impl NdpChain {
    /// Initial state: concentrations, sticks and atoms from their priors,
    /// subjects split into `min(K, 8)` quantile groups of their mean
    /// transformed distance, point indicators uniform. Sticks and atoms are
    /// then refreshed once given those indicators so the seeding carries
    /// into the first sweep.
    pub fn new(config: &NdpConfig, data: &[TransformedPattern], chain: u64) -> Result<Self, NdpError> {
        config.validate()?;
        if data.len() < 2 {
            return Err(NdpError::TooFewSubjects(data.len()));
        }
        if let Some(p) = data.iter().find(|p| p.is_empty()) {
            return Err(NdpError::EmptyPattern(p.subject_id.clone()));
        }
        let (k, l) = (config.k_trunc, config.l_trunc);
        let sizes: Vec<usize> = data.iter().map(|p| p.len()).collect();
        let mut state = NdpState::blank(k, l, &sizes);
        let mut init = rng::tagged(config.seed, Tag::Init, chain, 0, 0);

        let (alpha, rho) = match config.fixed_concentrations {
            Some(fixed) => fixed,
            None => (
                Gamma::new(config.alpha_prior.shape, 1.0 / config.alpha_prior.rate)
                    .expect("validated")
                    .sample(&mut init),
                Gamma::new(config.rho_prior.shape, 1.0 / config.rho_prior.rate)
                    .expect("validated")
                    .sample(&mut init),
            ),
        };
        state.alpha = alpha;
        state.rho = rho;
        let clamp = |u: f64| u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        match config.outer_weights {
            OuterWeights::StickBreaking => {
                let beta = Beta::new(1.0, alpha).expect("positive");
                for u in state.outer_sticks.iter_mut() {
                    *u = clamp(beta.sample(&mut init));
                }
            }
            OuterWeights::FixedUniform => set_uniform_sticks(&mut state.outer_sticks),
        }
        let beta = Beta::new(1.0, rho).expect("positive");
        for v in state.inner_sticks.iter_mut() {
            *v = clamp(beta.sample(&mut init));
        }
        state.refresh_weights();
        for i in 0..k * l {
            let (m, s2) = config.base_measure.sample(&mut init);
            state.mu[i] = m;
            state.sigma_sq[i] = s2;
        }

        let groups = k.min(8);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let means: Vec<f64> = data.iter().map(|p| p.mean()).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
        for (rank, &j) in order.iter().enumerate() {
            state.zeta[j] = rank * groups / data.len();
        }
        for xs in state.xi.iter_mut() {
            for x in xs.iter_mut() {
                *x = init.random_range(0..l);
            }
        }

        if config.outer_weights == OuterWeights::StickBreaking {
            updates::update_outer_sticks(&mut state, &mut init);
        }
        updates::update_inner_sticks(&mut state, &mut init);
        updates::update_atoms(&mut state, data, &config.base_measure, &mut init);

        Ok(Self {
            config: config.clone(),
            chain,
            state,
            rng: rng::tagged(config.seed, Tag::Chain, chain, 0, 0),
            iteration: 0,
        })
    }

    pub fn state(&self) -> &NdpState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut NdpState {
        &mut self.state
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// One full sweep: indicators, sticks, atoms, concentrations.
    pub fn sweep<E: Executor>(&mut self, data: &[TransformedPattern], exec: &E) -> Result<(), NdpError> {
        self.iteration += 1;
        let key = SweepKey {
            seed: self.config.seed,
            chain: self.chain,
            iteration: self.iteration,
        };
        updates::update_zeta(&mut self.state, data, key, exec)?;
        updates::update_xi(&mut self.state, data, key, exec)?;
        if self.config.outer_weights == OuterWeights::StickBreaking {
            updates::update_outer_sticks(&mut self.state, &mut self.rng);
        }
        updates::update_inner_sticks(&mut self.state, &mut self.rng);
        updates::update_atoms(&mut self.state, data, &self.config.base_measure, &mut self.rng);
        if self.config.fixed_concentrations.is_none() {
            updates::update_concentrations(
                &mut self.state,
                &self.config.alpha_prior,
                &self.config.rho_prior,
                &mut self.rng,
            );
        }
        Ok(())
    }

    /// Log joint density of data and parameters, inner indicators summed
    /// out.
    pub fn log_joint(&self, data: &[TransformedPattern]) -> f64 {
        let s = &self.state;
        let cfg = &self.config;
        let mut lj = 0.0;
        let mut row = vec![0.0; s.l];
        for (j, p) in data.iter().enumerate() {
            let k = s.zeta[j];
            lj += log(s.pi_star[k]);
            for &x in &p.values {
                for (l, r) in row.iter_mut().enumerate() {
                    let i = s.idx(k, l);
                    *r = log(s.w_star[i]) + crate::normal::ln_pdf(x, s.mu[i], s.sigma_sq[i]);
                }
                lj += log_sum_exp(&row);
            }
        }
        if cfg.outer_weights == OuterWeights::StickBreaking {
            lj += s.outer_sticks.iter().map(|&u| ln_beta_pdf(u, 1.0, s.alpha)).sum::<f64>();
        }
        lj += s.inner_sticks.iter().map(|&v| ln_beta_pdf(v, 1.0, s.rho)).sum::<f64>();
        lj += (0..s.k * s.l)
            .map(|i| cfg.base_measure.ln_pdf(s.mu[i], s.sigma_sq[i]))
            .sum::<f64>();
        if cfg.fixed_concentrations.is_none() {
            lj += ln_gamma_pdf(s.alpha, cfg.alpha_prior.shape, cfg.alpha_prior.rate);
            lj += ln_gamma_pdf(s.rho, cfg.rho_prior.shape, cfg.rho_prior.rate);
        }
        lj
    }

    pub fn snapshot(&self, data: &[TransformedPattern]) -> NdpDraw {
        let s = &self.state;
        NdpDraw {
            chain: self.chain as u32,
            iteration: self.iteration,
            k: s.k,
            l: s.l,
            zeta: s.zeta.clone(),
            pi_star: s.pi_star.clone(),
            w_star: s.w_star.clone(),
            mu: s.mu.clone(),
            sigma_sq: s.sigma_sq.clone(),
            alpha: s.alpha,
            rho: s.rho,
            log_joint: self.log_joint(data),
        }
    }
}

/// Sticks `1/K, 1/(K-1), ..., 1/2` give uniform weights `1/K`.
fn set_uniform_sticks(sticks: &mut [f64]) {
    let k = sticks.len() + 1;
    for (i, u) in sticks.iter_mut().enumerate() {
        *u = 1.0 / (k - i) as f64;
    }
}

/// Runs chain 0 sequentially.
pub fn run_sampler(patterns: &[PointPattern], config: &NdpConfig) -> Result<PosteriorDraws, NdpError> {
    run_chain_with(patterns, config, 0, &Sequential)
}

/// Runs one chain, keeping iterations `t > n_burnin` with
/// `(t - n_burnin) % thin == 0`.
pub fn run_chain_with<E: Executor>(
    patterns: &[PointPattern],
    config: &NdpConfig,
    chain: u64,
    exec: &E,
) -> Result<PosteriorDraws, NdpError> {
    config.validate()?;
    if patterns.len() < 2 {
        return Err(NdpError::TooFewSubjects(patterns.len()));
    }
    if let Some(p) = patterns.iter().find(|p| p.is_empty()) {
        return Err(NdpError::EmptyPattern(p.subject_id.clone()));
    }
    let data = patterns
        .iter()
        .map(probit_transform)
        .collect::<Result<Vec<_>, _>>()?;
    let radius = patterns[0].radius;
    let mut sampler = NdpChain::new(config, &data, chain)?;
    let mut draws = Vec::with_capacity(config.retained());
    for t in 1..=config.n_iter {
        sampler.sweep(&data, exec)?;
        if t > config.n_burnin && (t - config.n_burnin) % config.thin == 0 {
            draws.push(sampler.snapshot(&data));
        }
    }
    let report = RunReport {
        label_switch_suspects: detect_label_switching(&draws, 6.0, 20),
        subjects_with_ties: patterns
            .iter()
            .filter(|p| p.duplicate_count() > 0)
            .map(|p| p.subject_id.clone())
            .collect(),
    };
    Ok(PosteriorDraws {
        config: config.clone(),
        data_digest: data_digest(patterns),
        subject_ids: patterns.iter().map(|p| p.subject_id.clone()).collect(),
        radius,
        draws,
        report,
    })
}

/// Flags clusters whose mixture-mean trace (over draws in which the
/// cluster is occupied) jumps more than `z` running standard deviations
/// away from its running mean after `warmup` occupied draws. Chains are
/// tracked separately.
pub fn detect_label_switching(draws: &[NdpDraw], z: f64, warmup: usize) -> Vec<usize> {
    let Some(first) = draws.first() else {
        return Vec::new();
    };
    let k_trunc = first.k;
    let mut flagged = vec![false; k_trunc];
    let mut chains: Vec<u32> = draws.iter().map(|d| d.chain).collect();
    chains.sort_unstable();
    chains.dedup();
    for chain in chains {
        // (count, mean, m2) per cluster
        let mut acc = vec![(0usize, 0.0f64, 0.0f64); k_trunc];
        for d in draws.iter().filter(|d| d.chain == chain) {
            let mut occupied = vec![false; k_trunc];
            for &zk in &d.zeta {
                occupied[zk] = true;
            }
            for k in 0..k_trunc {
                if !occupied[k] {
                    continue;
                }
                let x: f64 = (0..d.l).map(|l| d.w_star[k * d.l + l] * d.mu[k * d.l + l]).sum();
                let (n, mean, m2) = &mut acc[k];
                if *n >= warmup {
                    let sd = libm::sqrt(*m2 / (*n - 1) as f64);
                    if sd > 0.0 && (x - *mean).abs() > z * sd {
                        flagged[k] = true;
                    }
                }
                *n += 1;
                let delta = x - *mean;
                *mean += delta / *n as f64;
                *m2 += delta * (x - *mean);
            }
        }
    }
    flagged
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(k, _)| k)
        .collect()
}
