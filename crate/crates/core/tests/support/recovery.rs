//! One replicate of the synthetic recovery study: NDP and the fixed
//! uniform-weight baseline on the default three-intensity scenario.

use ndpc_core::ndp::{run_sampler, NdpConfig, OuterWeights};
use ndpc_core::summary::{density_curves, vi_point_estimate, CoClusterMatrix, DensityCurves, DensityOptions, Partition};
use ndpc_core::synth::{
    adjusted_rand_index, default_scenario, quadratic_cocluster_loss, simulate_patterns, GenerativeScenario,
};
use ndpc_core::{PointPattern, Sequential};

pub struct Replicate {
    pub clusters: usize,
    pub ari: f64,
    /// ARI of the Bayes classifier that knows the three true intensities.
    pub oracle_ari: f64,
    pub ndp_loss: f64,
    pub baseline_loss: f64,
    /// Posterior density curves of the NDP run.
    pub curves: DensityCurves,
}

pub fn config(seed: u64, n_iter: usize, n_burnin: usize, thin: usize) -> NdpConfig {
    NdpConfig {
        k_trunc: 10,
        l_trunc: 4,
        n_iter,
        n_burnin,
        thin,
        seed,
        ..NdpConfig::default()
    }
}

pub fn replicate(seed: u64, n_iter: usize, n_burnin: usize, thin: usize) -> Replicate {
    let mut scenario = default_scenario();
    scenario.seed = seed;
    let data = simulate_patterns(&scenario).unwrap();
    let truth = Partition::from_labels(&data.truth);
    let ids: Vec<String> = data.patterns.iter().map(|p| p.subject_id.clone()).collect();
    let p_true = CoClusterMatrix::from_partition(&truth, &ids);

    let cfg = config(seed, n_iter, n_burnin, thin);
    let ndp = run_sampler(&data.patterns, &cfg).unwrap();
    let est = vi_point_estimate(&ndp.partitions()).unwrap();
    let p_ndp = CoClusterMatrix::from_draws(&ndp.draws, &ids, &Sequential).unwrap();
    let curves = density_curves(&ndp.draws, ndp.radius, &DensityOptions::default(), &Sequential).unwrap();

    let base_cfg = NdpConfig {
        outer_weights: OuterWeights::FixedUniform,
        ..cfg
    };
    let base = run_sampler(&data.patterns, &base_cfg).unwrap();
    let p_base = CoClusterMatrix::from_draws(&base.draws, &ids, &Sequential).unwrap();

    Replicate {
        clusters: est.partition.n_clusters(),
        ari: adjusted_rand_index(&est.partition, &truth).unwrap(),
        oracle_ari: oracle_ari(&scenario, &data.patterns, &truth),
        ndp_loss: quadratic_cocluster_loss(&p_ndp, &p_true).unwrap(),
        baseline_loss: quadratic_cocluster_loss(&p_base, &p_true).unwrap(),
        curves,
    }
}

/// Assigns each subject to the intensity with the largest likelihood of its
/// points (equal group sizes, so equal prior weights) and scores it against
/// the truth. No clustering method can do systematically better.
pub fn oracle_ari(scenario: &GenerativeScenario, patterns: &[PointPattern], truth: &Partition) -> f64 {
    let labels: Vec<usize> = patterns
        .iter()
        .map(|p| {
            let ll: Vec<f64> = scenario
                .intensities
                .iter()
                .map(|m| p.distances.iter().map(|&d| m.density(d / p.radius).ln()).sum())
                .collect();
            (0..ll.len()).fold(0, |b, g| if ll[g] > ll[b] { g } else { b })
        })
        .collect();
    adjusted_rand_index(&Partition::from_labels(&labels), truth).unwrap()
}
