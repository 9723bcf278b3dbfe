//! The pipeline stages as library calls: multi-chain NDP runs with their
//! convergence gates, posterior summaries, outcome fits and scoring.

use std::collections::HashMap;

use log::{info, warn};
use ndpc_core::diagnostics::{effective_sample_size, raftery_lewis, split_rhat};
use ndpc_core::ndp::{run_chain_with, NdpConfig, NdpDraw, PosteriorDraws};
use ndpc_core::outcome::{
    fit_bkmr, fit_cglm, quantity_effect_bkmr, quantity_effect_cglm, waic, BkmrConfig, OutcomeRecord, ParamSummary,
    QuantityEffect, Waic,
};
use ndpc_core::summary::{
    density_curves, heatmap_order, summarize_partitions, CoClusterMatrix, DensityCurves, DensityOptions, Partition,
    PartitionSummary,
};
use ndpc_core::synth::{adjusted_rand_index, binder_lau_green_loss, quadratic_cocluster_loss};
use ndpc_core::PointPattern;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::RayonExecutor;
use crate::io::SummaryRow;
use crate::manifest::{GateResult, GateStatus};

/// Runs `chains` chains concurrently, each with `threads` workers for its
/// per-subject updates, and concatenates them in chain order.
pub fn run_chains(patterns: &[PointPattern], cfg: &NdpConfig, chains: usize, threads: usize) -> Result<PosteriorDraws> {
    if chains == 0 {
        return Err(Error::Usage("need at least one chain".into()));
    }
    let exec = RayonExecutor::new(threads);
    let parts: Vec<_> = if chains == 1 {
        vec![run_chain_with(patterns, cfg, 0, &exec)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..chains)
                .map(|c| {
                    let exec = &exec;
                    s.spawn(move || run_chain_with(patterns, cfg, c as u64, exec))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
        })
    };
    let parts = parts.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;
    let merged = PosteriorDraws::merge(parts).expect("chains share their data");
    if !merged.report.label_switch_suspects.is_empty() {
        warn!("possible label switching in clusters {:?}", merged.report.label_switch_suspects);
    }
    Ok(merged)
}

/// Traces of one scalar per chain, in chain order.
fn traces(draws: &PosteriorDraws, f: impl Fn(&NdpDraw) -> f64) -> Vec<Vec<f64>> {
    draws
        .chains()
        .into_iter()
        .map(|c| draws.draws.iter().filter(|d| d.chain == c).map(&f).collect())
        .collect()
}

/// One line of the NDP diagnostics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub parameter: String,
    pub split_rhat: f64,
    pub ess: f64,
    pub rl_burn_in: Option<usize>,
    pub rl_n_required: Option<usize>,
    pub rl_thin: Option<usize>,
}

/// Split R-hat and ESS of `alpha`, `rho` and the log joint density, with
/// the Raftery-Lewis run length of the first chain when it has at least
/// 1,000 draws.
pub fn ndp_diagnostics(draws: &PosteriorDraws) -> Vec<DiagnosticRow> {
    let scalars: [(&str, fn(&NdpDraw) -> f64); 3] =
        [("alpha", |d| d.alpha), ("rho", |d| d.rho), ("log_joint", |d| d.log_joint)];
    scalars
        .iter()
        .filter_map(|(name, f)| {
            let t = traces(draws, f);
            let rhat = match split_rhat(&t) {
                Ok(r) => r.value,
                Err(e) => {
                    warn!("no split R-hat for {name}: {e}");
                    return None;
                }
            };
            let ess = effective_sample_size(&t).map_or(f64::NAN, |e| e.value);
            let rl = raftery_lewis(&t[0], 0.025, 0.005, 0.95).ok();
            Some(DiagnosticRow {
                parameter: name.to_string(),
                split_rhat: rhat,
                ess,
                rl_burn_in: rl.map(|r| r.burn_in),
                rl_n_required: rl.map(|r| r.n_required),
                rl_thin: rl.map(|r| r.thin),
            })
        })
        .collect()
}

pub fn gates(rows: &[DiagnosticRow], warn_above: f64, fail_above: f64) -> Vec<GateResult> {
    rows.iter()
        .map(|r| GateResult::new(format!("split_rhat:{}", r.parameter), r.split_rhat, warn_above, fail_above))
        .collect()
}

/// Error for the first failing gate, if any; warnings are logged.
pub fn check_gates(results: &[GateResult]) -> Result<()> {
    for g in results {
        match g.status {
            GateStatus::Warn => warn!("{} = {:.4} above {}", g.name, g.value, g.warn_above),
            GateStatus::Fail => {
                return Err(Error::Gate(format!("{} = {:.4} above {}", g.name, g.value, g.fail_above)));
            }
            GateStatus::Ok => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryInfo {
    pub draws: usize,
    pub chains: usize,
    pub clusters: usize,
    pub expected_vi: f64,
    pub ball_radius: f64,
    pub level: f64,
    pub density_chain: u32,
    pub consensus_subjects: usize,
    pub warnings: Vec<String>,
}

pub struct Summaries {
    pub cocluster: CoClusterMatrix,
    pub partitions: PartitionSummary,
    pub curves: DensityCurves,
    pub order: Vec<usize>,
    pub info: SummaryInfo,
}

/// Co-clustering, VI point estimate with credible ball and consensus,
/// heatmap order and density curves. Cluster indices are not comparable
/// across chains, so the curves use the chain holding the first draw equal
/// to the point estimate.
pub fn summarize(draws: &PosteriorDraws, level: f64, grid_size: usize, threads: usize) -> Result<Summaries> {
    let exec = RayonExecutor::new(threads);
    let cocluster = CoClusterMatrix::from_draws(&draws.draws, &draws.subject_ids, &exec)?;
    let parts = draws.partitions();
    let partitions = summarize_partitions(&parts, level, false, &exec)?;
    let order = heatmap_order(&cocluster);
    let at = parts.iter().position(|p| *p == partitions.mode).unwrap_or(0);
    let chain = draws.draws[at].chain;
    let own: Vec<NdpDraw> = draws.draws.iter().filter(|d| d.chain == chain).cloned().collect();
    let opts = DensityOptions {
        grid_size,
        ..DensityOptions::default()
    };
    let curves = density_curves(&own, draws.radius, &opts, &exec)?;
    let warnings: Vec<String> = curves.warnings.iter().map(|w| format!("{w:?}")).collect();
    for w in &warnings {
        warn!("density curves: {w}");
    }
    let info = SummaryInfo {
        draws: draws.draws.len(),
        chains: draws.chains().len(),
        clusters: partitions.mode.n_clusters(),
        expected_vi: partitions.expected_loss,
        ball_radius: partitions.ball_radius,
        level,
        density_chain: chain,
        consensus_subjects: partitions.consensus.iter().filter(|c| c.is_some()).count(),
        warnings,
    };
    Ok(Summaries {
        cocluster,
        partitions,
        curves,
        order,
        info,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeModel {
    /// GLM on consensus cluster labels.
    Cglm,
    /// GLM on mode cluster labels.
    Mglm,
    /// Kernel machine regression over co-clustering rows.
    Bkmr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// Schools without restaurants plus consensus-labeled schools.
    Consensus,
    /// Every school.
    Full,
}

impl OutcomeModel {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeModel::Cglm => "cglm",
            OutcomeModel::Mglm => "mglm",
            OutcomeModel::Bkmr => "bkmr",
        }
    }
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Consensus => "consensus",
            Dataset::Full => "full",
        }
    }
}

pub struct OutcomeFit {
    pub records: usize,
    pub coefficients: Vec<ParamSummary>,
    pub quantity: Vec<QuantityEffect>,
    pub h: Option<Vec<ParamSummary>>,
    pub waic: Waic,
    pub max_rhat: f64,
    pub converged: bool,
}

/// Records of the requested dataset with the cluster label each one uses.
/// Schools with restaurants must appear in the partition summary.
pub fn select_records(
    records: &[OutcomeRecord],
    summary: &[SummaryRow],
    model: OutcomeModel,
    dataset: Dataset,
) -> Result<(Vec<OutcomeRecord>, Vec<Option<u32>>)> {
    let by_id: HashMap<&str, &SummaryRow> = summary.iter().map(|r| (r.subject_id.as_str(), r)).collect();
    let mut keep = Vec::new();
    let mut labels = Vec::new();
    let mut excluded = 0;
    for r in records {
        if r.ffr_count == 0 {
            keep.push(r.clone());
            labels.push(None);
            continue;
        }
        let row = by_id
            .get(r.subject_id.as_str())
            .ok_or_else(|| ndpc_core::outcome::OutcomeError::MissingClusterLabel(r.subject_id.clone()))?;
        if dataset == Dataset::Consensus && row.consensus.is_none() {
            excluded += 1;
            continue;
        }
        keep.push(r.clone());
        labels.push(Some(match model {
            OutcomeModel::Cglm => row.consensus.expect("consensus dataset"),
            _ => row.mode,
        }));
    }
    if excluded > 0 {
        info!("{excluded} school(s) without a consensus label left out of the consensus dataset");
    }
    Ok((keep, labels))
}

/// Fits one outcome model. `summary` is needed by the label models and by
/// the kernel model on the consensus dataset; `cocluster` by the kernel
/// model.
pub fn fit_outcome(
    records: &[OutcomeRecord],
    summary: Option<&[SummaryRow]>,
    cocluster: Option<&CoClusterMatrix>,
    model: OutcomeModel,
    dataset: Dataset,
    cfg: &BkmrConfig,
    threads: usize,
) -> Result<OutcomeFit> {
    if model == OutcomeModel::Cglm && dataset == Dataset::Full {
        return Err(Error::Usage(
            "the consensus GLM is defined on the consensus dataset; use --model mglm for the full data".into(),
        ));
    }
    let exec = RayonExecutor::new(threads);
    match model {
        OutcomeModel::Cglm | OutcomeModel::Mglm => {
            let summary = summary.ok_or_else(|| Error::Usage(format!("--model {} needs --partitions", model.name())))?;
            let (recs, labels) = select_records(records, summary, model, dataset)?;
            let fit = fit_cglm(&recs, &labels, &cfg.mcmc, &exec)?;
            if !fit.dropped.is_empty() {
                info!("unused columns dropped: {}", fit.dropped.join(", "));
            }
            let quantity = quantity_effect_cglm(&fit, &fit.cluster_weights)?;
            Ok(OutcomeFit {
                records: recs.len(),
                coefficients: fit.summaries.clone(),
                quantity,
                h: None,
                waic: waic(&fit.pointwise_log_lik())?,
                max_rhat: fit.max_rhat,
                converged: fit.converged,
            })
        }
        OutcomeModel::Bkmr => {
            let p = cocluster.ok_or_else(|| Error::Usage("--model bkmr needs --cocluster".into()))?;
            let recs = match dataset {
                Dataset::Full => records.to_vec(),
                Dataset::Consensus => {
                    let summary = summary
                        .ok_or_else(|| Error::Usage("--model bkmr --dataset consensus needs --partitions".into()))?;
                    select_records(records, summary, model, dataset)?.0
                }
            };
            let fit = fit_bkmr(&recs, p, cfg, &exec)?;
            if !fit.dropped.is_empty() {
                info!("unused columns dropped: {}", fit.dropped.join(", "));
            }
            Ok(OutcomeFit {
                records: recs.len(),
                coefficients: fit.summaries.clone(),
                quantity: quantity_effect_bkmr(&fit)?,
                h: Some(fit.h_summaries.clone()),
                waic: waic(&fit.pointwise_log_lik())?,
                max_rhat: fit.max_rhat,
                converged: fit.converged,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub subjects: usize,
    pub estimate_clusters: usize,
    pub truth_clusters: usize,
    pub binder_lau_green: u64,
    pub adjusted_rand: f64,
    pub quadratic: Option<f64>,
}

/// Losses of `estimate` against `truth`; the quadratic loss needs a
/// co-clustering matrix over the same subjects (in any order).
pub fn score(
    subject_ids: &[String],
    estimate: &Partition,
    truth: &Partition,
    cocluster: Option<&CoClusterMatrix>,
) -> Result<ScoreReport> {
    let quadratic = match cocluster {
        None => None,
        Some(p) => {
            let at: HashMap<&str, usize> = p.subject_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
            let idx = subject_ids
                .iter()
                .map(|s| {
                    at.get(s.as_str())
                        .copied()
                        .ok_or_else(|| Error::Usage(format!("subject {s:?} is missing from the co-clustering matrix")))
                })
                .collect::<Result<Vec<_>>>()?;
            let n = idx.len();
            let mut probs = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    probs[a * n + b] = p.get(idx[a], idx[b]);
                }
            }
            let aligned = CoClusterMatrix {
                n,
                probs,
                subject_ids: subject_ids.to_vec(),
            };
            let t = CoClusterMatrix::from_partition(truth, subject_ids);
            Some(quadratic_cocluster_loss(&aligned, &t)?)
        }
    };
    Ok(ScoreReport {
        subjects: subject_ids.len(),
        estimate_clusters: estimate.n_clusters(),
        truth_clusters: truth.n_clusters(),
        binder_lau_green: binder_lau_green_loss(estimate, truth)?,
        adjusted_rand: adjusted_rand_index(estimate, truth)?,
        quadratic,
    })
}
