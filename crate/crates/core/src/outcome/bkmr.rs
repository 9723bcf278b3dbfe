use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::glm::{BinomialLogit, Mode};
use super::gp::{cholesky_with_jitter, elliptical_slice, squared_distance, FoldedNormal};
use super::mcmc::{accept, chain_rng, param_chains, summarize_param, McmcConfig, ParamSummary, RandomWalk};
use super::{OutcomeError, OutcomeRecord, QuantityCategory, QuantityEffect, COVARIATE_NAMES};
use crate::exec::Executor;
use crate::stats::inv_logit;
use crate::summary::CoClusterMatrix;

/// Coefficient order of the kernel machine model. `zeta_0` applies to
/// records without restaurants, `alpha_tilde` to all others.
pub const BKMR_COEFFICIENTS: [&str; 16] = [
    "zeta_0",
    "alpha_tilde",
    "zeta_2",
    "zeta_3",
    "zeta_4",
    "zeta_5_7",
    "zeta_8plus",
    COVARIATE_NAMES[0],
    COVARIATE_NAMES[1],
    COVARIATE_NAMES[2],
    COVARIATE_NAMES[3],
    COVARIATE_NAMES[4],
    COVARIATE_NAMES[5],
    COVARIATE_NAMES[6],
    COVARIATE_NAMES[7],
    COVARIATE_NAMES[8],
];

const MODEL_TAG: u64 = 1;
const MAX_JITTER: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BkmrConfig {
    pub mcmc: McmcConfig,
    pub phi_prior: FoldedNormal,
    pub sigma_sq_prior: FoldedNormal,
    /// Initial diagonal jitter; raised tenfold up to 1e-5 if needed.
    pub jitter: f64,
    /// Coefficient random-walk steps per iteration.
    pub coefficient_steps: usize,
    /// Drop the likelihood and hold the coefficients at their start.
    pub prior_only: bool,
}

impl Default for BkmrConfig {
    fn default() -> Self {
        let prior = FoldedNormal { loc: 1.0, scale: 3.0 };
        Self {
            mcmc: McmcConfig::default(),
            phi_prior: prior,
            sigma_sq_prior: prior,
            jitter: 1e-8,
            coefficient_steps: 5,
            prior_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BkmrFit {
    pub model: BinomialLogit,
    pub dropped: Vec<String>,
    /// Records carrying a GP value, in record order.
    pub h_subjects: Vec<String>,
    /// For each record, its position in `h_subjects`.
    pub h_index: Vec<Option<usize>>,
    pub jitter: f64,
    pub mode: Mode,
    /// `[chain][draw][coefficient]`.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub phi: Vec<Vec<f64>>,
    pub sigma_sq: Vec<Vec<f64>>,
    /// `[chain][draw][subject]`.
    pub h: Vec<Vec<Vec<f64>>>,
    /// Coefficients, then `phi` and `sigma_sq`.
    pub summaries: Vec<ParamSummary>,
    pub h_summaries: Vec<ParamSummary>,
    /// Largest split R-hat over the coefficients.
    pub max_rhat: f64,
    pub converged: bool,
}

impl BkmrFit {
    pub fn names(&self) -> &[String] {
        &self.model.names
    }

    /// Value of a named coefficient in one draw; dropped columns read as 0.
    pub fn coefficient(&self, theta: &[f64], name: &str) -> f64 {
        self.model.names.iter().position(|n| n == name).map_or(0.0, |j| theta[j])
    }

    pub fn h_mean(&self) -> Vec<f64> {
        self.h_summaries.iter().map(|s| s.mean).collect()
    }

    /// Pooled `(coefficients, h)` pairs in chain order.
    pub fn pooled(&self) -> impl Iterator<Item = (&Vec<f64>, &Vec<f64>)> {
        self.coefficients.iter().flatten().zip(self.h.iter().flatten())
    }

    pub fn eta(&self, theta: &[f64], h: &[f64], i: usize) -> f64 {
        self.model.xb(theta, i) + self.h_index[i].map_or(0.0, |j| h[j])
    }

    /// `[draw][record]` log-likelihoods over pooled draws.
    pub fn pointwise_log_lik(&self) -> Vec<Vec<f64>> {
        self.pooled()
            .map(|(t, h)| (0..self.model.n()).map(|i| self.model.log_lik_at(i, self.eta(t, h, i))).collect())
            .collect()
    }

    pub fn summary(&self, name: &str) -> Option<&ParamSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

fn design_row(r: &OutcomeRecord) -> Vec<f64> {
    let mut row = vec![0.0; 16];
    match r.category().zeta_index() {
        Some(0) => row[0] = 1.0,
        Some(m) => {
            row[1] = 1.0;
            row[1 + m] = 1.0;
        }
        None => row[1] = 1.0,
    }
    row[7..].copy_from_slice(&r.covariates.vector());
    row
}

struct Factor {
    lower: DMatrix<f64>,
    log_det: f64,
    /// `L^-1 1`.
    ones: DVector<f64>,
}

struct Kernel<'a> {
    d2: &'a DMatrix<f64>,
    jitter: f64,
}

impl Kernel<'_> {
    fn factor(&self, phi: f64, s2: f64) -> Option<Factor> {
        if !(phi > 0.0 && s2 > 0.0 && phi.is_finite() && s2.is_finite()) {
            return None;
        }
        let m = self.d2.nrows();
        let c = 1.0 / (2.0 * phi * phi);
        let mut k = self.d2.map(|d| s2 * exp(-d * c));
        for i in 0..m {
            k[(i, i)] += self.jitter;
        }
        let lower = k.cholesky()?.unpack();
        let log_det = 2.0 * (0..m).map(|i| log(lower[(i, i)])).sum::<f64>();
        let ones = lower.solve_lower_triangular(&DVector::from_element(m, 1.0))?;
        Some(Factor { lower, log_det, ones })
    }
}

struct ChainOut {
    coefficients: Vec<Vec<f64>>,
    phi: Vec<f64>,
    sigma_sq: Vec<f64>,
    h: Vec<Vec<f64>>,
}

struct Ctx<'a> {
    model: &'a BinomialLogit,
    /// Record index of each GP value.
    records_of_h: &'a [usize],
    kernel: Kernel<'a>,
    mode: &'a Mode,
    cfg: &'a BkmrConfig,
    alpha: usize,
}

impl Ctx<'_> {
    fn ln_hyper_prior(&self, log_phi: f64, log_s2: f64) -> f64 {
        // Densities on the log scale carry the Jacobian.
        self.cfg.phi_prior.ln_pdf(exp(log_phi)) + log_phi + self.cfg.sigma_sq_prior.ln_pdf(exp(log_s2)) + log_s2
    }

    fn ll_h(&self, xb: &[f64], h: &DVector<f64>) -> f64 {
        if self.cfg.prior_only {
            return 0.0;
        }
        self.records_of_h
            .iter()
            .zip(h.iter())
            .map(|(&i, hj)| self.model.log_lik_at(i, xb[i] + hj))
            .sum()
    }

    fn ll_full(&self, theta: &[f64], offset: &[f64]) -> f64 {
        (0..self.model.n())
            .map(|i| self.model.log_lik_at(i, self.model.xb(theta, i) + offset[i]))
            .sum()
    }

    fn offsets(&self, h: &DVector<f64>) -> Vec<f64> {
        let mut o = vec![0.0; self.model.n()];
        for (&i, hj) in self.records_of_h.iter().zip(h.iter()) {
            o[i] = *hj;
        }
        o
    }

    fn run(&self, chain: usize) -> ChainOut {
        let mc = &self.cfg.mcmc;
        let mut rng = chain_rng(mc.seed, chain, MODEL_TAG);
        let p = self.model.p;
        let mut coef_rw = RandomWalk::new(&self.mode.covariance, p);
        let mut theta: Vec<f64> = if self.cfg.prior_only {
            self.mode.theta.clone()
        } else {
            let e = coef_rw.shaped_noise(&mut rng);
            self.mode.theta.iter().zip(&e).map(|(m, e)| m + 2.0 * e).collect()
        };

        let mut hyper = None;
        for _ in 0..100 {
            let phi = self.cfg.phi_prior.sample(&mut rng);
            let s2 = self.cfg.sigma_sq_prior.sample(&mut rng);
            if let Some(f) = self.kernel.factor(phi, s2) {
                hyper = Some((phi, s2, f));
                break;
            }
        }
        let (mut phi, mut s2, mut fac) = hyper.unwrap_or_else(|| {
            let f = self.kernel.factor(1.0, 1.0).expect("checked before sampling");
            (1.0, 1.0, f)
        });
        let m = self.records_of_h.len();
        let mut z = DVector::from_iterator(m, (0..m).map(|_| StandardNormal.sample(&mut rng)));
        let mut h = &fac.lower * &z;

        let mut hyper_c = RandomWalk::new(&[1.0, 0.0, 0.0, 1.0], 2);
        let mut hyper_w = RandomWalk::new(&[1.0, 0.0, 0.0, 1.0], 2);

        let total = mc.warmup + mc.draws;
        let mut out = ChainOut {
            coefficients: Vec::with_capacity(mc.draws),
            phi: Vec::with_capacity(mc.draws),
            sigma_sq: Vec::with_capacity(mc.draws),
            h: Vec::with_capacity(mc.draws),
        };
        for it in 0..total {
            let adapting = it < mc.warmup;

            if !self.cfg.prior_only {
                let offset = self.offsets(&h);
                let mut ll = self.ll_full(&theta, &offset);
                for _ in 0..self.cfg.coefficient_steps {
                    let prop = coef_rw.propose(&theta, &mut rng);
                    let lp = self.ll_full(&prop, &offset);
                    let ok = accept(lp - ll, &mut rng);
                    if ok {
                        theta = prop;
                        ll = lp;
                    }
                    coef_rw.record(ok, adapting);
                }
            }

            let mut xb: Vec<f64> = (0..self.model.n()).map(|i| self.model.xb(&theta, i)).collect();
            let ll_h = self.ll_h(&xb, &h);
            h = elliptical_slice(&h, ll_h, &fac.lower, |g| self.ll_h(&xb, g), &mut rng).0;
            z = fac.lower.solve_lower_triangular(&h).expect("factor is nonsingular");

            // alpha + c, h - c leaves the likelihood unchanged; draw c from
            // its exact conditional under the GP prior.
            if !self.cfg.prior_only {
                let prec = fac.ones.dot(&fac.ones);
                let noise: f64 = StandardNormal.sample(&mut rng);
                let c = fac.ones.dot(&z) / prec + noise / sqrt(prec);
                theta[self.alpha] += c;
                h.add_scalar_mut(-c);
                z.axpy(-c, &fac.ones, 1.0);
                for &i in self.records_of_h {
                    xb[i] += c;
                }
            }

            // Hyperparameters with h held fixed.
            let cur = [log(phi), log(s2)];
            let prop = hyper_c.propose(&cur, &mut rng);
            let mut ok = false;
            if let Some(f) = self.kernel.factor(exp(prop[0]), exp(prop[1])) {
                if let Some(z2) = f.lower.solve_lower_triangular(&h) {
                    let lr = self.ln_hyper_prior(prop[0], prop[1]) - self.ln_hyper_prior(cur[0], cur[1])
                        - 0.5 * (z2.norm_squared() + f.log_det)
                        + 0.5 * (z.norm_squared() + fac.log_det);
                    if accept(lr, &mut rng) {
                        ok = true;
                        phi = exp(prop[0]);
                        s2 = exp(prop[1]);
                        fac = f;
                        z = z2;
                    }
                }
            }
            hyper_c.record(ok, adapting);

            // Hyperparameters with the whitened h held fixed.
            let cur = [log(phi), log(s2)];
            let prop = hyper_w.propose(&cur, &mut rng);
            let mut ok = false;
            if let Some(f) = self.kernel.factor(exp(prop[0]), exp(prop[1])) {
                let h2 = &f.lower * &z;
                let lr = self.ln_hyper_prior(prop[0], prop[1]) - self.ln_hyper_prior(cur[0], cur[1])
                    + self.ll_h(&xb, &h2)
                    - self.ll_h(&xb, &h);
                if accept(lr, &mut rng) {
                    ok = true;
                    phi = exp(prop[0]);
                    s2 = exp(prop[1]);
                    fac = f;
                    h = h2;
                }
            }
            hyper_w.record(ok, adapting);

            if !adapting {
                out.coefficients.push(theta.clone());
                out.phi.push(phi);
                out.sigma_sq.push(s2);
                out.h.push(h.iter().copied().collect());
            }
        }
        out
    }
}

/// Subjects whose kernel rows coincide with another subject's.
fn duplicate_rows(ids: &[String], d2: &DMatrix<f64>) -> Vec<String> {
    let m = ids.len();
    let mut out = Vec::new();
    for i in 0..m {
        if (0..m).any(|j| j != i && d2[(i, j)] == 0.0) {
            out.push(ids[i].clone());
        }
    }
    out
}

/// Kernel machine regression: flat priors on the coefficients, a Gaussian
/// process over co-clustering rows for records with restaurants, and
/// folded-normal priors on the GP range and variance.
pub fn fit_bkmr<E: Executor>(
    records: &[OutcomeRecord],
    p: &CoClusterMatrix,
    cfg: &BkmrConfig,
    exec: &E,
) -> Result<BkmrFit, OutcomeError> {
    cfg.mcmc.validate()?;
    if !(cfg.jitter > 0.0 && cfg.jitter <= MAX_JITTER) || cfg.coefficient_steps == 0 {
        return Err(OutcomeError::InvalidConfig("jitter must lie in (0, 1e-5] and coefficient_steps be positive"));
    }
    if records.is_empty() {
        return Err(OutcomeError::Empty);
    }
    for r in records {
        r.validate()?;
    }
    let row_of: BTreeMap<&str, usize> = p.subject_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut records_of_h = Vec::new();
    let mut kernel_rows = Vec::new();
    let mut h_index = vec![None; records.len()];
    for (i, r) in records.iter().enumerate() {
        if r.ffr_count == 0 {
            continue;
        }
        let row = *row_of
            .get(r.subject_id.as_str())
            .ok_or_else(|| OutcomeError::MissingKernelRow(r.subject_id.clone()))?;
        h_index[i] = Some(records_of_h.len());
        records_of_h.push(i);
        kernel_rows.push(row);
    }
    if records_of_h.is_empty() {
        return Err(OutcomeError::InvalidConfig("kernel model needs records with restaurants nearby"));
    }
    let m = records_of_h.len();
    let d2 = DMatrix::from_fn(m, m, |a, b| squared_distance(p.row(kernel_rows[a]), p.row(kernel_rows[b])));
    let h_subjects: Vec<String> = records_of_h.iter().map(|&i| records[i].subject_id.clone()).collect();

    let probe = d2.map(|d| exp(-d / 2.0));
    let jitter = cholesky_with_jitter(&probe, cfg.jitter, MAX_JITTER)
        .ok_or_else(|| OutcomeError::NonPsdKernel {
            subjects: duplicate_rows(&h_subjects, &d2),
        })?
        .1;

    let rows: Vec<Vec<f64>> = records.iter().map(design_row).collect();
    let y: Vec<u64> = records.iter().map(|r| r.obese_count).collect();
    let n: Vec<u64> = records.iter().map(|r| r.total_count).collect();
    let mut model = BinomialLogit::new(BKMR_COEFFICIENTS.iter().map(|s| s.to_string()).collect(), &rows, &y, &n);
    let dropped = model.drop_empty_columns();
    let mode = model.find_mode()?;
    let alpha = model
        .names
        .iter()
        .position(|n| n == "alpha_tilde")
        .expect("records with restaurants use alpha_tilde");

    let ctx = Ctx {
        model: &model,
        records_of_h: &records_of_h,
        kernel: Kernel { d2: &d2, jitter },
        mode: &mode,
        cfg,
        alpha,
    };
    let chains = exec.map_indexed(cfg.mcmc.chains, |c| ctx.run(c));

    let coefficients: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| c.coefficients.clone()).collect();
    let phi: Vec<Vec<f64>> = chains.iter().map(|c| c.phi.clone()).collect();
    let sigma_sq: Vec<Vec<f64>> = chains.iter().map(|c| c.sigma_sq.clone()).collect();
    let h: Vec<Vec<Vec<f64>>> = chains.into_iter().map(|c| c.h).collect();

    let mut summaries: Vec<ParamSummary> = model
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| summarize_param(name, &param_chains(&coefficients, j)))
        .collect();
    let (max_rhat, worst) = summaries
        .iter()
        .map(|s| (s.split_rhat, s.name.clone()))
        .fold((f64::NEG_INFINITY, String::new()), |a, b| if b.0 > a.0 || b.0.is_nan() { b } else { a });
    summaries.push(summarize_param("phi", &phi));
    summaries.push(summarize_param("sigma_sq", &sigma_sq));
    let h_summaries = h_subjects
        .iter()
        .enumerate()
        .map(|(j, id)| summarize_param(id, &param_chains(&h, j)))
        .collect();

    let converged = max_rhat < cfg.mcmc.rhat_fail;
    if !converged && !cfg.mcmc.force {
        return Err(OutcomeError::NotConverged {
            parameter: worst,
            rhat: max_rhat,
        });
    }
    Ok(BkmrFit {
        model,
        dropped,
        h_subjects,
        h_index,
        jitter,
        mode,
        coefficients,
        phi,
        sigma_sq,
        h,
        summaries,
        h_summaries,
        max_rhat,
        converged,
    })
}

/// Per-draw category probabilities averaged over the posterior-mean GP
/// values: `mean_i logit^-1(alpha_tilde + zeta_m + h_i)` for categories with
/// restaurants (no `zeta` for one restaurant) and `logit^-1(zeta_0)` for
/// none. Categories whose coefficient was dropped are skipped.
pub fn quantity_effect_bkmr(fit: &BkmrFit) -> Result<Vec<QuantityEffect>, OutcomeError> {
    let h_hat = fit.h_mean();
    let draws: Vec<&Vec<f64>> = fit.coefficients.iter().flatten().collect();
    if draws.is_empty() {
        return Err(OutcomeError::NoDraws);
    }
    let name_of = |m: usize| BKMR_COEFFICIENTS[if m == 0 { 0 } else { m + 1 }];
    let mut out = Vec::new();
    for cat in QuantityCategory::ALL {
        if let Some(m) = cat.zeta_index() {
            if fit.dropped.iter().any(|d| d == name_of(m)) {
                continue;
            }
        }
        let values = draws
            .iter()
            .map(|t| match cat.zeta_index() {
                Some(0) => inv_logit(fit.coefficient(t, "zeta_0")),
                m => {
                    let shift = fit.coefficient(t, "alpha_tilde") + m.map_or(0.0, |m| fit.coefficient(t, name_of(m)));
                    h_hat.iter().map(|h| inv_logit(shift + h)).sum::<f64>() / h_hat.len() as f64
                }
            })
            .collect();
        out.push(QuantityEffect::from_draws(cat, values));
    }
    Ok(out)
}
