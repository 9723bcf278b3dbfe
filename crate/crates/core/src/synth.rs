//! Synthetic point-pattern scenarios and clustering losses for simulation
//! studies.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::exp;
use rand::Rng;
use rand_distr::{Beta, Distribution, Poisson};
use thiserror::Error;

use crate::pattern::PointPattern;
use crate::rng::{self, Tag};
use crate::stats::ln_beta_pdf;
use crate::summary::{CoClusterMatrix, Partition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("mixture {index}: {reason}")]
    InvalidMixture { index: usize, reason: &'static str },
    #[error("scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Finite mixture of Beta densities on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaMixture {
    pub weights: Vec<f64>,
    /// `(a, b)` shape pairs.
    pub shapes: Vec<(f64, f64)>,
}

impl BetaMixture {
    pub fn new(weights: Vec<f64>, shapes: Vec<(f64, f64)>) -> Self {
        Self { weights, shapes }
    }

    fn validate(&self, index: usize) -> Result<(), SynthError> {
        let bad = |reason| Err(SynthError::InvalidMixture { index, reason });
        if self.weights.is_empty() || self.weights.len() != self.shapes.len() {
            return bad("weights and shapes must be non-empty and of equal length");
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return bad("negative weight");
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("weights must sum to 1");
        }
        if self.shapes.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite())) {
            return bad("shapes must be positive");
        }
        Ok(())
    }

    /// Density at `x` in `(0, 1)`.
    pub fn density(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.shapes)
            .map(|(&w, &(a, b))| w * exp(ln_beta_pdf(x, a, b)))
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.weights.len() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = i;
                break;
            }
        }
        let (a, b) = self.shapes[pick];
        Beta::new(a, b).expect("validated shapes").sample(rng)
    }
}

/// Points per subject.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CountLaw {
    /// Poisson with this mean, redrawn until at least 1.
    Poisson { mean: f64 },
    /// Uniform on `min..=max`.
    Range { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenerativeScenario {
    pub intensities: Vec<BetaMixture>,
    pub group_sizes: Vec<usize>,
    pub count_law: CountLaw,
    pub radius: f64,
    pub seed: u64,
}

/// Three intensities with 50 subjects each, Poisson(10) counts, `R = 1`.
pub fn default_scenario() -> GenerativeScenario {
    GenerativeScenario {
        intensities: vec![
            BetaMixture::new(vec![0.5, 0.5], vec![(1.0, 8.0), (6.0, 1.0)]),
            BetaMixture::new(vec![1.0 / 5.0, 2.0 / 3.0, 2.0 / 15.0], vec![(3.0, 2.0), (3.0, 1.0), (1.0, 1.0)]),
            BetaMixture::new(vec![0.5, 0.5], vec![(8.0, 2.0), (30.0, 50.0)]),
        ],
        group_sizes: vec![50, 50, 50],
        count_law: CountLaw::Poisson { mean: 10.0 },
        radius: 1.0,
        seed: 0,
    }
}

impl GenerativeScenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (i, m) in self.intensities.iter().enumerate() {
            m.validate(i)?;
        }
        if self.group_sizes.len() != self.intensities.len() {
            return Err(SynthError::InvalidScenario("one group size per intensity"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(SynthError::InvalidScenario("radius must be positive"));
        }
        match self.count_law {
            CountLaw::Poisson { mean } if !(mean > 0.0 && mean.is_finite()) => {
                Err(SynthError::InvalidScenario("Poisson mean must be positive"))
            }
            CountLaw::Range { min, max } if min == 0 || max < min => {
                Err(SynthError::InvalidScenario("count range must satisfy 1 <= min <= max"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub patterns: Vec<PointPattern>,
    /// Generating intensity of each subject, 1-based.
    pub truth: Vec<u32>,
}

/// Draws every subject's pattern from its own substream. Draws that round
/// onto an endpoint of `(0, R)` are redrawn.
pub fn simulate_patterns(scenario: &GenerativeScenario) -> Result<SimulatedData, SynthError> {
    scenario.validate()?;
    let mut patterns = Vec::new();
    let mut truth = Vec::new();
    let mut j = 0u64;
    for (g, (mix, &size)) in scenario.intensities.iter().zip(&scenario.group_sizes).enumerate() {
        for _ in 0..size {
            let mut r = rng::tagged(scenario.seed, Tag::Simulate, j, 0, 0);
            let n = match scenario.count_law {
                CountLaw::Poisson { mean } => {
                    let law = Poisson::new(mean).expect("validated mean");
                    loop {
                        let k: f64 = law.sample(&mut r);
                        if k >= 1.0 {
                            break k as usize;
                        }
                    }
                }
                CountLaw::Range { min, max } => r.random_range(min..=max),
            };
            let distances = (0..n)
                .map(|_| loop {
                    let d = scenario.radius * mix.sample(&mut r);
                    if d > 0.0 && d < scenario.radius {
                        break d;
                    }
                })
                .collect();
            patterns.push(PointPattern {
                subject_id: format!("s{:04}", j + 1),
                distances,
                radius: scenario.radius,
            });
            truth.push(g as u32 + 1);
            j += 1;
        }
    }
    Ok(SimulatedData { patterns, truth })
}

fn same_len(a: &Partition, b: &Partition) -> Result<(), SynthError> {
    if a.len() != b.len() {
        return Err(SynthError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Number of pairs on which the two partitions disagree about co-membership.
pub fn binder_lau_green_loss(estimate: &Partition, truth: &Partition) -> Result<u64, SynthError> {
    same_len(estimate, truth)?;
    let n = estimate.len();
    let mut loss = 0;
    for i in 0..n {
        for j in i + 1..n {
            if estimate.same_cluster(i, j) != truth.same_cluster(i, j) {
                loss += 1;
            }
        }
    }
    Ok(loss)
}

/// Sum over pairs `i < j` of `(p_hat_ij - p_ij)^2`.
pub fn quadratic_cocluster_loss(p_hat: &CoClusterMatrix, p_true: &CoClusterMatrix) -> Result<f64, SynthError> {
    if p_hat.n != p_true.n {
        return Err(SynthError::DimensionMismatch {
            left: p_hat.n,
            right: p_true.n,
        });
    }
    let mut loss = 0.0;
    for i in 0..p_hat.n {
        for j in i + 1..p_hat.n {
            let d = p_hat.get(i, j) - p_true.get(i, j);
            loss += d * d;
        }
    }
    Ok(loss)
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index. Two single-cluster (or two
/// all-singleton) partitions score 1.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64, SynthError> {
    same_len(a, b)?;
    let (ka, kb) = (a.n_clusters(), b.n_clusters());
    let mut table = vec![0.0; ka * kb];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        table[(x as usize - 1) * kb + y as usize - 1] += 1.0;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sa: f64 = a.sizes().iter().map(|&c| choose2(c as f64)).sum();
    let sb: f64 = b.sizes().iter().map(|&c| choose2(c as f64)).sum();
    let total = choose2(a.len() as f64);
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

impl CoClusterMatrix {
    /// 0/1 matrix of a single partition.
    pub fn from_partition(p: &Partition, subject_ids: &[String]) -> Self {
        let n = p.len();
        let mut probs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if p.same_cluster(i, j) {
                    probs[i * n + j] = 1.0;
                }
            }
        }
        Self {
            n,
            probs,
            subject_ids: subject_ids.to_vec(),
        }
    }
}
