//! Truncated nested Dirichlet process mixture of normals.
//!
//! Outer level: subjects pick one of `K` distributions with stick-breaking
//! weights `pi`. Inner level: each of those distributions is itself an
//! `L`-component stick-breaking mixture of normals over probit-transformed
//! distances. The blocked Gibbs sampler in [`sampler`] updates, in order,
//! the subject indicators, the point indicators, both stick sets, the atoms
//! and the two concentrations.

mod nix;
mod sampler;
mod state;
mod updates;

pub use nix::{NixPrior, SuffStats};
pub use sampler::{data_digest, detect_label_switching, run_chain_with, run_sampler, NdpChain, NdpDraw, PosteriorDraws, RunReport};
pub use state::{stick_break, NdpState};
pub use updates::{
    update_atoms, update_concentrations, update_inner_sticks, update_outer_sticks, update_xi, update_zeta, SweepKey,
};

use alloc::string::String;
use thiserror::Error;

use crate::pattern::PatternError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NdpError {
    #[error("stick {index} = {value} is outside (0, 1)")]
    StickOutOfRange { index: usize, value: f64 },
    #[error("all cluster masses underflowed for subject {subject}")]
    NumericalUnderflow { subject: usize },
    #[error("subject {0} has no distances")]
    EmptyPattern(String),
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("state invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// `Gamma(shape, rate)` prior.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub const fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// How the outer (distribution-level) weights evolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OuterWeights {
    /// Stick-breaking weights with concentration `alpha` (the NDP).
    #[default]
    StickBreaking,
    /// Weights held at `1/K`: the finite hierarchical mixture baseline.
    FixedUniform,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NdpConfig {
    pub k_trunc: usize,
    pub l_trunc: usize,
    pub alpha_prior: GammaPrior,
    pub rho_prior: GammaPrior,
    pub base_measure: NixPrior,
    pub n_iter: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub outer_weights: OuterWeights,
    /// Holds `(alpha, rho)` fixed instead of sampling them.
    pub fixed_concentrations: Option<(f64, f64)>,
}

impl Default for NdpConfig {
    fn default() -> Self {
        Self {
            k_trunc: 35,
            l_trunc: 30,
            alpha_prior: GammaPrior::new(10.0, 10.0),
            rho_prior: GammaPrior::new(10.0, 10.0),
            base_measure: NixPrior::default(),
            n_iter: 250_000,
            n_burnin: 240_000,
            thin: 3,
            seed: 0,
            outer_weights: OuterWeights::StickBreaking,
            fixed_concentrations: None,
        }
    }
}

impl NdpConfig {
    /// Shorter chain (20,000 iterations, 15,000 burn-in, thin 5) used for
    /// laptop-scale runs.
    pub fn desk_scale() -> Self {
        Self {
            n_iter: 20_000,
            n_burnin: 15_000,
            thin: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NdpError> {
        if self.k_trunc < 2 {
            return Err(NdpError::InvalidConfig("k_trunc must be at least 2"));
        }
        if self.l_trunc < 2 {
            return Err(NdpError::InvalidConfig("l_trunc must be at least 2"));
        }
        if self.n_burnin >= self.n_iter {
            return Err(NdpError::InvalidConfig("n_burnin must be smaller than n_iter"));
        }
        if self.thin == 0 {
            return Err(NdpError::InvalidConfig("thin must be at least 1"));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(self.alpha_prior.shape)
            && positive(self.alpha_prior.rate)
            && positive(self.rho_prior.shape)
            && positive(self.rho_prior.rate))
        {
            return Err(NdpError::InvalidConfig("concentration priors need positive shape and rate"));
        }
        let b = &self.base_measure;
        if !(b.mu0.is_finite() && positive(b.kappa0) && positive(b.nu0) && positive(b.s0_sq)) {
            return Err(NdpError::InvalidConfig("base measure needs finite mu0 and positive kappa0, nu0, s0_sq"));
        }
        if let Some((a, r)) = self.fixed_concentrations {
            if !(positive(a) && positive(r)) {
                return Err(NdpError::InvalidConfig("fixed concentrations must be positive"));
            }
        }
        Ok(())
    }

    /// Number of retained draws: `floor((n_iter - n_burnin) / thin)`.
    pub fn retained(&self) -> usize {
        (self.n_iter - self.n_burnin) / self.thin
    }
}
