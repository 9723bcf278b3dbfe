use libm::{lgamma, log};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::normal;

/// Normal–scaled-inverse-chi-square distribution over `(mu, sigma_sq)`:
/// `sigma_sq ~ Inv-chi^2(nu0, s0_sq)`, `mu | sigma_sq ~ N(mu0, sigma_sq / kappa0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NixPrior {
    pub mu0: f64,
    pub kappa0: f64,
    pub nu0: f64,
    pub s0_sq: f64,
}

impl Default for NixPrior {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            kappa0: 1.0,
            nu0: 1.0,
            s0_sq: 1.0,
        }
    }
}

/// Count, mean and centred sum of squares, accumulated with Welford's
/// update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SuffStats {
    pub n: usize,
    pub mean: f64,
    pub ss: f64,
}

impl SuffStats {
    pub fn push(&mut self, y: f64) {
        self.n += 1;
        let delta = y - self.mean;
        self.mean += delta / self.n as f64;
        self.ss += delta * (y - self.mean);
    }

    pub fn from_slice(ys: &[f64]) -> Self {
        let mut s = Self::default();
        for &y in ys {
            s.push(y);
        }
        s
    }
}

impl NixPrior {
    /// Conjugate posterior given the sufficient statistics of the assigned
    /// points.
    pub fn posterior(&self, stats: &SuffStats) -> NixPrior {
        if stats.n == 0 {
            return *self;
        }
        let n = stats.n as f64;
        let kappa_n = self.kappa0 + n;
        let mu_n = (self.kappa0 * self.mu0 + n * stats.mean) / kappa_n;
        let nu_n = self.nu0 + n;
        let dev = stats.mean - self.mu0;
        let s_sq_n = (self.nu0 * self.s0_sq + stats.ss + self.kappa0 * n / kappa_n * dev * dev) / nu_n;
        NixPrior {
            mu0: mu_n,
            kappa0: kappa_n,
            nu0: nu_n,
            s0_sq: s_sq_n,
        }
    }

    /// Draws `(mu, sigma_sq)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let chi_sq = 2.0 * Gamma::new(self.nu0 / 2.0, 1.0).expect("positive shape").sample(rng);
        let sigma_sq = (self.nu0 * self.s0_sq / chi_sq).clamp(f64::MIN_POSITIVE, f64::MAX);
        let z: f64 = StandardNormal.sample(rng);
        let mu = self.mu0 + z * libm::sqrt(sigma_sq / self.kappa0);
        (mu, sigma_sq)
    }

    /// Marginal mean of `mu`; finite whenever `nu0 > 1`.
    pub fn mean_mu(&self) -> f64 {
        self.mu0
    }

    /// Joint log density.
    pub fn ln_pdf(&self, mu: f64, sigma_sq: f64) -> f64 {
        let half_nu = self.nu0 / 2.0;
        let ln_inv_chi = half_nu * log(half_nu) - lgamma(half_nu) + half_nu * log(self.s0_sq)
            - (half_nu + 1.0) * log(sigma_sq)
            - self.nu0 * self.s0_sq / (2.0 * sigma_sq);
        ln_inv_chi + normal::ln_pdf(mu, self.mu0, sigma_sq / self.kappa0)
    }
}
