use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::glm::{BinomialLogit, Mode};
use super::mcmc::{param_chains, run_random_walk, summarize_param, McmcConfig, ParamSummary};
use super::{OutcomeError, OutcomeRecord, QuantityCategory, QuantityEffect, COVARIATE_NAMES};
use crate::exec::Executor;
use crate::stats::inv_logit;

pub const ZETA_NAMES: [&str; 6] = ["zeta_0", "zeta_2", "zeta_3", "zeta_4", "zeta_5_7", "zeta_8plus"];

/// Coefficients of the cluster-label GLM: `zeta` per quantity category
/// (no entry for one restaurant), `xi` per cluster label, `beta` per
/// covariate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CglmCoefficients {
    pub zeta: [f64; 6],
    pub cluster_labels: Vec<u32>,
    pub xi: Vec<f64>,
    pub beta: [f64; 9],
}

fn xi_index(labels: &[u32], label: u32, subject: &str) -> Result<usize, OutcomeError> {
    labels
        .iter()
        .position(|&l| l == label)
        .ok_or_else(|| OutcomeError::MissingClusterLabel(subject.to_string()))
}

/// `zeta_0 + Z.beta` without restaurants; otherwise the category effect
/// plus the cluster's `xi` plus `Z.beta`.
pub fn cglm_linear_predictor(
    record: &OutcomeRecord,
    label: Option<u32>,
    coef: &CglmCoefficients,
) -> Result<f64, OutcomeError> {
    let zb: f64 = record
        .covariates
        .vector()
        .iter()
        .zip(&coef.beta)
        .map(|(z, b)| z * b)
        .sum();
    if record.ffr_count == 0 {
        return Ok(coef.zeta[0] + zb);
    }
    let label = label.ok_or_else(|| OutcomeError::MissingClusterLabel(record.subject_id.clone()))?;
    let k = xi_index(&coef.cluster_labels, label, &record.subject_id)?;
    let q = record.category().zeta_index().map_or(0.0, |m| coef.zeta[m]);
    Ok(q + coef.xi[k] + zb)
}

fn design_row(record: &OutcomeRecord, label: Option<u32>, clusters: &[u32]) -> Result<Vec<f64>, OutcomeError> {
    let mut row = vec![0.0; 6 + clusters.len() + 9];
    if let Some(m) = record.category().zeta_index() {
        row[m] = 1.0;
    }
    if record.ffr_count > 0 {
        let label = label.ok_or_else(|| OutcomeError::MissingClusterLabel(record.subject_id.clone()))?;
        row[6 + xi_index(clusters, label, &record.subject_id)?] = 1.0;
    }
    row[6 + clusters.len()..].copy_from_slice(&record.covariates.vector());
    Ok(row)
}

/// Distinct labels of records with restaurants, ascending, and the share of
/// those records carrying each.
pub fn cluster_weights(records: &[OutcomeRecord], labels: &[Option<u32>]) -> (Vec<u32>, Vec<f64>) {
    let mut seen: Vec<(u32, usize)> = Vec::new();
    let mut total = 0usize;
    for (r, l) in records.iter().zip(labels) {
        if r.ffr_count == 0 {
            continue;
        }
        if let Some(l) = *l {
            total += 1;
            match seen.binary_search_by_key(&l, |&(x, _)| x) {
                Ok(i) => seen[i].1 += 1,
                Err(i) => seen.insert(i, (l, 1)),
            }
        }
    }
    let labels = seen.iter().map(|&(l, _)| l).collect();
    let weights = seen.iter().map(|&(_, c)| c as f64 / total as f64).collect();
    (labels, weights)
}

/// Posterior draws of a binomial-logit regression with flat priors.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub model: BinomialLogit,
    /// Columns removed because no record uses them.
    pub dropped: Vec<String>,
    pub cluster_labels: Vec<u32>,
    pub cluster_weights: Vec<f64>,
    pub mode: Mode,
    /// `[chain][draw][coefficient]`.
    pub draws: Vec<Vec<Vec<f64>>>,
    pub summaries: Vec<ParamSummary>,
    pub max_rhat: f64,
    pub converged: bool,
}

impl GlmFit {
    pub fn names(&self) -> &[String] {
        &self.model.names
    }

    pub fn pooled(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.draws.iter().flatten()
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.model.names.iter().position(|n| n == name)
    }

    /// Named coefficients of one draw; dropped columns read as 0.
    pub fn coefficients(&self, theta: &[f64]) -> CglmCoefficients {
        let get = |name: &str| self.position(name).map_or(0.0, |j| theta[j]);
        let mut zeta = [0.0; 6];
        for (z, n) in zeta.iter_mut().zip(ZETA_NAMES) {
            *z = get(n);
        }
        let mut beta = [0.0; 9];
        for (b, n) in beta.iter_mut().zip(COVARIATE_NAMES) {
            *b = get(n);
        }
        CglmCoefficients {
            zeta,
            cluster_labels: self.cluster_labels.clone(),
            xi: self.cluster_labels.iter().map(|l| get(&format!("xi_{l}"))).collect(),
            beta,
        }
    }

    /// `[draw][record]` log-likelihoods over pooled draws.
    pub fn pointwise_log_lik(&self) -> Vec<Vec<f64>> {
        self.pooled().map(|t| self.model.pointwise(t)).collect()
    }

    pub fn summary(&self, name: &str) -> Option<&ParamSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

/// Fits an arbitrary binomial-logit model by adaptive random-walk
/// Metropolis started around its mode.
pub fn fit_glm<E: Executor>(mut model: BinomialLogit, cfg: &McmcConfig, exec: &E) -> Result<GlmFit, OutcomeError> {
    cfg.validate()?;
    if model.n() == 0 {
        return Err(OutcomeError::Empty);
    }
    let dropped = model.drop_empty_columns();
    let mode = model.find_mode()?;
    let log_post = |t: &[f64]| model.log_lik(t);
    let draws = run_random_walk(&log_post, &mode.theta, &mode.covariance, cfg, 0, exec);
    let summaries: Vec<ParamSummary> = model
        .names
        .iter()
        .enumerate()
        .map(|(j, n)| summarize_param(n, &param_chains(&draws, j)))
        .collect();
    let worst = summaries
        .iter()
        .fold(None::<&ParamSummary>, |w, s| match w {
            Some(w) if !(s.split_rhat > w.split_rhat) => Some(w),
            _ => Some(s),
        })
        .expect("at least one coefficient");
    let max_rhat = worst.split_rhat;
    let converged = max_rhat < cfg.rhat_fail;
    if !converged && !cfg.force {
        return Err(OutcomeError::NotConverged {
            parameter: worst.name.clone(),
            rhat: max_rhat,
        });
    }
    Ok(GlmFit {
        model,
        dropped,
        cluster_labels: Vec::new(),
        cluster_weights: Vec::new(),
        mode,
        draws,
        summaries,
        max_rhat,
        converged,
    })
}

/// Cluster-label GLM. `labels[i]` is the cluster of record `i` (consensus
/// labels for the consensus fit, mode labels for the full-data fit);
/// records with restaurants must carry one.
pub fn fit_cglm<E: Executor>(
    records: &[OutcomeRecord],
    labels: &[Option<u32>],
    cfg: &McmcConfig,
    exec: &E,
) -> Result<GlmFit, OutcomeError> {
    if records.is_empty() {
        return Err(OutcomeError::Empty);
    }
    if labels.len() != records.len() {
        return Err(OutcomeError::InvalidConfig("one label slot per record"));
    }
    for r in records {
        r.validate()?;
    }
    let (clusters, weights) = cluster_weights(records, labels);
    let mut names: Vec<String> = ZETA_NAMES.iter().map(|s| s.to_string()).collect();
    names.extend(clusters.iter().map(|l| format!("xi_{l}")));
    names.extend(COVARIATE_NAMES.iter().map(|s| s.to_string()));
    let rows = records
        .iter()
        .zip(labels)
        .map(|(r, &l)| design_row(r, l, &clusters))
        .collect::<Result<Vec<_>, _>>()?;
    let y: Vec<u64> = records.iter().map(|r| r.obese_count).collect();
    let n: Vec<u64> = records.iter().map(|r| r.total_count).collect();
    let model = BinomialLogit::new(names, &rows, &y, &n);
    let mut fit = fit_glm(model, cfg, exec)?;
    fit.cluster_labels = clusters;
    fit.cluster_weights = weights;
    Ok(fit)
}

/// Per-draw `sum_k w_k logit^-1(zeta_m + xi_k)` for every category (`zeta`
/// is 0 for one restaurant; no restaurants uses `logit^-1(zeta_0)`).
/// Categories whose coefficient was dropped are skipped.
pub fn quantity_effect_cglm(fit: &GlmFit, weights: &[f64]) -> Result<Vec<QuantityEffect>, OutcomeError> {
    if weights.len() != fit.cluster_labels.len()
        || weights.iter().any(|&w| !(w >= 0.0))
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(OutcomeError::WeightsNotNormalized);
    }
    let coefs: Vec<CglmCoefficients> = fit.pooled().map(|t| fit.coefficients(t)).collect();
    if coefs.is_empty() {
        return Err(OutcomeError::NoDraws);
    }
    let mut out = Vec::new();
    for cat in QuantityCategory::ALL {
        if let Some(m) = cat.zeta_index() {
            if fit.dropped.iter().any(|d| d == ZETA_NAMES[m]) {
                continue;
            }
        }
        let draws: Vec<f64> = coefs
            .iter()
            .map(|c| match cat.zeta_index() {
                Some(0) => inv_logit(c.zeta[0]),
                m => {
                    let z = m.map_or(0.0, |m| c.zeta[m]);
                    c.xi.iter().zip(weights).map(|(x, w)| w * inv_logit(z + x)).sum()
                }
            })
            .collect();
        out.push(QuantityEffect::from_draws(cat, draws));
    }
    Ok(out)
}
