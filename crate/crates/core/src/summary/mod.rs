//! Posterior summaries of NDP draws: co-clustering probabilities, the
//! VI-optimal partition with its credible ball, consensus labels and
//! back-transformed cluster densities.

mod cocluster;
mod density;
mod partition;
mod vi;

pub use cocluster::{heatmap_objective, heatmap_order, CoClusterMatrix};
pub use density::{density_curves, extended_trapezoid, ClusterCurve, DensityCurves, DensityOptions, DensityWarning};
pub use partition::Partition;
pub use vi::{
    consensus_labels, credible_ball_bounds, expected_vi, refine_point_estimate, summarize_partitions, vi_distance,
    vi_point_estimate, vi_point_estimate_with, CredibleBall, PartitionSummary, PointEstimate,
};

use alloc::vec::Vec;
use thiserror::Error;

use crate::ndp::PosteriorDraws;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SummaryError {
    #[error("no posterior draws")]
    NoDraws,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("credible level must lie in (0, 1]")]
    InvalidLevel,
    #[error("grid size must be at least 2")]
    InvalidGrid,
}

impl PosteriorDraws {
    /// Canonical partitions of the retained draws, in draw order.
    pub fn partitions(&self) -> Vec<Partition> {
        self.draws.iter().map(|d| Partition::from_labels(&d.zeta)).collect()
    }
}

/// Co-clustering matrix of all retained draws.
pub fn coclustering_matrix(draws: &PosteriorDraws) -> Result<CoClusterMatrix, SummaryError> {
    CoClusterMatrix::from_draws(&draws.draws, &draws.subject_ids, &crate::exec::Sequential)
}
