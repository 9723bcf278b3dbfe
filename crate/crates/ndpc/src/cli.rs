//! Command-line surface. Every command writes its outputs and a
//! `manifest.json` into `--out`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use ndpc_core::ndp::NdpConfig;
use ndpc_core::outcome::BkmrConfig;
use ndpc_core::summary::DensityOptions;
use ndpc_core::synth::{default_scenario, simulate_patterns};

use crate::error::{io_err, Error, Result};
use crate::io;
use crate::manifest::RunManifest;
use crate::pipeline::{self, Dataset, OutcomeModel};
use crate::stream;

#[derive(Debug, Parser)]
#[command(name = "ndpc", version, about = "Nested Dirichlet process clustering of point patterns and outcome models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate distance patterns from a generative scenario.
    Simulate(SimulateArgs),
    /// Fit the NDP mixture to a distances file.
    FitNdp(FitNdpArgs),
    /// Summarize a draw stream into plot-ready tables.
    Summarize(SummarizeArgs),
    /// Fit an outcome model on cluster labels or co-clustering rows.
    FitOutcome(FitOutcomeArgs),
    /// Score an estimated partition against true labels.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Versioned scenario JSON; the built-in three-intensity scenario if
    /// omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitNdpArgs {
    #[arg(long)]
    pub distances: PathBuf,
    /// NDP configuration JSON; missing fields take library defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub k_trunc: Option<usize>,
    #[arg(long)]
    pub l_trunc: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Standard deviation of noise added to repeated distances.
    #[arg(long, default_value_t = 0.0)]
    pub jitter_sd: f64,
    #[arg(long, default_value_t = 1.01)]
    pub rhat_warn: f64,
    #[arg(long, default_value_t = 1.05)]
    pub rhat_fail: f64,
    /// Keep the outputs and exit 0 even when a convergence gate fails.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub draws: PathBuf,
    /// Credible-ball level.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = DensityOptions::default().grid_size)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitOutcomeArgs {
    #[arg(long)]
    pub outcomes: PathBuf,
    /// Partition summary CSV from `summarize`.
    #[arg(long)]
    pub partitions: Option<PathBuf>,
    /// Co-clustering CSV from `summarize`.
    #[arg(long)]
    pub cocluster: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: OutcomeModel,
    #[arg(long, value_enum)]
    pub dataset: Dataset,
    /// Kernel model configuration JSON (its `mcmc` block also drives the
    /// GLMs); missing fields take library defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Iterations per chain, warm-up included.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Warm-up iterations per chain.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub rhat_fail: Option<f64>,
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Partition summary CSV (its `mode` column is scored) or a
    /// `subject_id,label` CSV.
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Co-clustering CSV for the quadratic loss.
    #[arg(long)]
    pub cocluster: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::FitNdp(_) => "fit-ndp",
            Command::Summarize(_) => "summarize",
            Command::FitOutcome(_) => "fit-outcome",
            Command::Score(_) => "score",
        }
    }

    fn out(&self) -> &Path {
        match self {
            Command::Simulate(a) => &a.out,
            Command::FitNdp(a) => &a.out,
            Command::Summarize(a) => &a.out,
            Command::FitOutcome(a) => &a.out,
            Command::Score(a) => &a.out,
        }
    }
}

/// Runs a command, always leaving a manifest behind, and returns the
/// process exit code.
pub fn run(cli: Cli) -> i32 {
    let out = cli.command.out().to_path_buf();
    let mut manifest = RunManifest::start(cli.command.name(), 0);
    let result = std::fs::create_dir_all(&out)
        .map_err(io_err(&out))
        .and_then(|_| dispatch(&cli.command, &mut manifest));
    let (code, message) = match &result {
        Ok(()) => (0, None),
        Err(e) => (e.exit_code(), Some(e.to_string())),
    };
    if let Some(m) = &message {
        eprintln!("error: {m}");
    }
    if let Err(e) = manifest.finish(&out, code, message) {
        eprintln!("error: could not write manifest: {e}");
        return if code == 0 { 1 } else { code };
    }
    code
}

fn dispatch(cmd: &Command, m: &mut RunManifest) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a, m),
        Command::FitNdp(a) => fit_ndp(a, m),
        Command::Summarize(a) => summarize(a, m),
        Command::FitOutcome(a) => fit_outcome(a, m),
        Command::Score(a) => score(a, m),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn simulate(a: &SimulateArgs, m: &mut RunManifest) -> Result<()> {
    let mut scenario = match &a.scenario {
        Some(p) => {
            m.input(p)?;
            io::read_scenario(p)?
        }
        None => default_scenario(),
    };
    if let Some(s) = a.seed {
        scenario.seed = s;
    }
    if let Some(r) = a.radius {
        scenario.radius = r;
    }
    m.seed = scenario.seed;
    m.config = to_value(&scenario);
    let data = simulate_patterns(&scenario)?;
    let ids: Vec<String> = data.patterns.iter().map(|p| p.subject_id.clone()).collect();
    let dist = a.out.join("distances.csv");
    let truth = a.out.join("truth.csv");
    let spec = a.out.join("scenario.json");
    io::write_distances(&dist, &data.patterns)?;
    io::write_labels(&truth, &ids, &data.truth)?;
    io::write_json(
        &spec,
        &io::ScenarioFile {
            version: io::SCENARIO_VERSION,
            scenario,
        },
    )?;
    for p in [dist, truth, spec] {
        m.output(&p);
    }
    info!("simulated {} subjects", ids.len());
    Ok(())
}

fn ndp_config(a: &FitNdpArgs) -> Result<NdpConfig> {
    let mut cfg: NdpConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => NdpConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.iters {
        cfg.n_iter = v;
    }
    if let Some(v) = a.burnin {
        cfg.n_burnin = v;
    }
    if let Some(v) = a.thin {
        cfg.thin = v;
    }
    if let Some(v) = a.k_trunc {
        cfg.k_trunc = v;
    }
    if let Some(v) = a.l_trunc {
        cfg.l_trunc = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fit_ndp(a: &FitNdpArgs, m: &mut RunManifest) -> Result<()> {
    if let Some(p) = &a.config {
        m.input(p)?;
    }
    let cfg = ndp_config(a)?;
    m.seed = cfg.seed;
    m.config = serde_json::json!({
        "ndp": to_value(&cfg),
        "chains": a.chains,
        "threads": a.threads,
        "radius": a.radius,
        "jitter_sd": a.jitter_sd,
        "rhat_warn": a.rhat_warn,
        "rhat_fail": a.rhat_fail,
        "force": a.force,
    });
    m.input(&a.distances)?;
    let patterns = io::read_distances(&a.distances, a.radius, a.jitter_sd, cfg.seed)?;
    info!("fitting {} subjects with {} chain(s)", patterns.len(), a.chains);
    let draws = pipeline::run_chains(&patterns, &cfg, a.chains, a.threads)?;
    let path = a.out.join("draws.jsonl");
    stream::write_draws(&path, &draws)?;
    m.output(&path);
    let rows = pipeline::ndp_diagnostics(&draws);
    let diag = a.out.join("diagnostics.csv");
    write_diagnostics(&diag, &rows)?;
    m.output(&diag);
    m.gates = pipeline::gates(&rows, a.rhat_warn, a.rhat_fail);
    match pipeline::check_gates(&m.gates) {
        Err(e) if !a.force => Err(e),
        Err(e) => {
            log::warn!("{e}; continuing because of --force");
            Ok(())
        }
        Ok(()) => Ok(()),
    }
}

fn write_diagnostics(path: &Path, rows: &[pipeline::DiagnosticRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(crate::error::csv_err(path))?;
    let opt = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
    let r: std::result::Result<(), csv::Error> = (|| {
        w.write_record(["parameter", "split_rhat", "ess", "rl_burn_in", "rl_n_required", "rl_thin"])?;
        for r in rows {
            w.write_record([
                r.parameter.clone(),
                io::fmt_f64(r.split_rhat),
                io::fmt_f64(r.ess),
                opt(r.rl_burn_in),
                opt(r.rl_n_required),
                opt(r.rl_thin),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    r.map_err(crate::error::csv_err(path))
}

fn summarize(a: &SummarizeArgs, m: &mut RunManifest) -> Result<()> {
    m.input(&a.draws)?;
    let draws = stream::read_draws(&a.draws)?;
    m.seed = draws.config.seed;
    m.config = serde_json::json!({ "level": a.level, "grid_size": a.grid_size, "threads": a.threads });
    let s = pipeline::summarize(&draws, a.level, a.grid_size, a.threads)?;
    let ids = &draws.subject_ids;
    let files = [
        "cocluster.csv",
        "partition_summary.csv",
        "density_curves.csv",
        "cluster_weights.csv",
        "heatmap_order.csv",
        "summary.json",
    ];
    let p = |f: &str| a.out.join(f);
    io::write_cocluster(&p(files[0]), &s.cocluster)?;
    io::write_partition_summary(&p(files[1]), ids, &s.partitions)?;
    io::write_density_curves(&p(files[2]), &s.curves)?;
    io::write_cluster_weights(&p(files[3]), &s.curves)?;
    io::write_heatmap_order(&p(files[4]), ids, &s.order)?;
    io::write_json(&p(files[5]), &s.info)?;
    for f in files {
        m.output(&p(f));
    }
    info!("{} clusters, {} consensus subjects", s.info.clusters, s.info.consensus_subjects);
    Ok(())
}

fn fit_outcome(a: &FitOutcomeArgs, m: &mut RunManifest) -> Result<()> {
    let mut cfg: BkmrConfig = match &a.config {
        Some(p) => {
            m.input(p)?;
            io::read_json(p)?
        }
        None => BkmrConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.mcmc.seed = v;
    }
    if let Some(v) = a.chains {
        cfg.mcmc.chains = v;
    }
    if let Some(v) = a.burnin {
        cfg.mcmc.warmup = v;
    }
    if let Some(v) = a.iters {
        cfg.mcmc.draws = v
            .checked_sub(cfg.mcmc.warmup)
            .ok_or_else(|| Error::Usage("--iters must exceed --burnin".into()))?;
    }
    if let Some(v) = a.rhat_fail {
        cfg.mcmc.rhat_fail = v;
    }
    cfg.mcmc.force = cfg.mcmc.force || a.force;
    m.seed = cfg.mcmc.seed;
    m.config = serde_json::json!({
        "model": a.model,
        "dataset": a.dataset,
        "bkmr": to_value(&cfg),
        "threads": a.threads,
    });
    if a.model == OutcomeModel::Cglm && a.dataset == Dataset::Full {
        return Err(Error::Usage(
            "the consensus GLM is defined on the consensus dataset; use --model mglm for the full data".into(),
        ));
    }
    m.input(&a.outcomes)?;
    let table = io::read_outcomes(&a.outcomes)?;
    let summary = match &a.partitions {
        Some(p) => {
            m.input(p)?;
            Some(io::read_partition_summary(p)?)
        }
        None => None,
    };
    let cocluster = match &a.cocluster {
        Some(p) => {
            m.input(p)?;
            Some(io::read_cocluster(p)?)
        }
        None => None,
    };
    let fit = pipeline::fit_outcome(
        &table.records,
        summary.as_deref(),
        cocluster.as_ref(),
        a.model,
        a.dataset,
        &cfg,
        a.threads,
    )?;
    m.gates
        .push(crate::manifest::GateResult::new("max_split_rhat", fit.max_rhat, 1.01, cfg.mcmc.rhat_fail));
    let p = |f: &str| a.out.join(f);
    io::write_param_summaries(&p("coefficients.csv"), &fit.coefficients, "name")?;
    io::write_quantity_effects(&p("quantity_effects.csv"), &fit.quantity)?;
    io::write_json(
        &p("waic.json"),
        &io::WaicReport::new(a.model.name(), a.dataset.name(), fit.records, &fit.waic),
    )?;
    for f in ["coefficients.csv", "quantity_effects.csv", "waic.json"] {
        m.output(&p(f));
    }
    if let Some(h) = &fit.h {
        io::write_param_summaries(&p("h.csv"), h, "subject_id")?;
        m.output(&p("h.csv"));
    }
    if !fit.converged {
        log::warn!("split R-hat {:.4} above {}; kept because of --force", fit.max_rhat, cfg.mcmc.rhat_fail);
    }
    if fit.waic.unstable > 0 {
        log::warn!(
            "{} pointwise WAIC variances exceed 0.4; the estimate may be unreliable",
            fit.waic.unstable
        );
    }
    Ok(())
}

fn score(a: &ScoreArgs, m: &mut RunManifest) -> Result<()> {
    m.input(&a.estimate)?;
    m.input(&a.truth)?;
    let truth_rows = io::read_labels(&a.truth)?;
    let ids: Vec<String> = truth_rows.iter().map(|(s, _)| s.clone()).collect();
    let truth = io::partition_for(&a.truth, &truth_rows, &ids)?;
    let est_rows: Vec<(String, u32)> = match io::read_partition_summary(&a.estimate) {
        Ok(rows) => rows.into_iter().map(|r| (r.subject_id, r.mode)).collect(),
        Err(Error::MissingColumn { .. }) => io::read_labels(&a.estimate)?,
        Err(e) => return Err(e),
    };
    let estimate = io::partition_for(&a.estimate, &est_rows, &ids)?;
    let cocluster = match &a.cocluster {
        Some(p) => {
            m.input(p)?;
            Some(io::read_cocluster(p)?)
        }
        None => None,
    };
    let report = pipeline::score(&ids, &estimate, &truth, cocluster.as_ref())?;
    let path = a.out.join("score.json");
    io::write_json(&path, &report)?;
    m.output(&path);
    Ok(())
}
