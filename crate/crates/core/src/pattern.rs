//! Point patterns of distances and the inhomogeneous Poisson process
//! likelihood.
//!
//! A subject's pattern is the set of distances `0 < d < R` from the subject
//! to nearby features. The Poisson intensity factors as `gamma * f(r)`:
//! `gamma` is the expected count inside the radius and `f` a density on
//! `(0, R)`. Distances are mapped to the real line by `Phi^-1(d / R)` before
//! mixture modelling.

use alloc::string::String;
use alloc::vec::Vec;

use libm::log;
use thiserror::Error;

use crate::normal;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("subject {subject_id}: distance {distance} at position {index} is outside (0, {radius})")]
    BoundaryDistance {
        subject_id: String,
        index: usize,
        distance: f64,
        radius: f64,
    },
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("expected count gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("density is not positive at distance {distance} (value {value})")]
    NonpositiveDensity { distance: f64, value: f64 },
}

/// One subject's distances (miles) to nearby features within `radius`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointPattern {
    pub subject_id: String,
    pub distances: Vec<f64>,
    pub radius: f64,
}

impl PointPattern {
    /// Validating constructor: every distance must lie strictly inside
    /// `(0, radius)`.
    pub fn new(subject_id: impl Into<String>, distances: Vec<f64>, radius: f64) -> Result<Self, PatternError> {
        let p = Self {
            subject_id: subject_id.into(),
            distances,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(PatternError::InvalidRadius(self.radius));
        }
        for (index, &d) in self.distances.iter().enumerate() {
            if !(d > 0.0 && d < self.radius) {
                return Err(PatternError::BoundaryDistance {
                    subject_id: self.subject_id.clone(),
                    index,
                    distance: d,
                    radius: self.radius,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// Number of distances that repeat an earlier value exactly.
    pub fn duplicate_count(&self) -> usize {
        let mut sorted = self.distances.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// Probit-transformed distances `Phi^-1(d / R)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransformedPattern {
    pub subject_id: String,
    pub values: Vec<f64>,
}

impl TransformedPattern {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.values)
    }
}

/// Intensity `lambda(r) = gamma * density(r)` of one subject's process.
#[derive(Debug, Clone, Copy)]
pub struct IppParams<F> {
    gamma: f64,
    density: F,
}

impl<F: Fn(f64) -> f64> IppParams<F> {
    pub fn new(gamma: f64, density: F) -> Result<Self, PatternError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(PatternError::InvalidGamma(gamma));
        }
        Ok(Self { gamma, density })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn density(&self, r: f64) -> f64 {
        (self.density)(r)
    }
}

pub fn probit_transform(pattern: &PointPattern) -> Result<TransformedPattern, PatternError> {
    pattern.validate()?;
    let values = pattern
        .distances
        .iter()
        .map(|&d| normal::quantile(d / pattern.radius))
        .collect();
    Ok(TransformedPattern {
        subject_id: pattern.subject_id.clone(),
        values,
    })
}

/// `R * Phi(value)`.
pub fn inverse_probit(value: f64, radius: f64) -> f64 {
    radius * normal::cdf(value)
}

/// `n log(gamma) - gamma + sum_j log f(r_j)`; the `log n!` term is
/// dropped, so values are only comparable within one model family.
pub fn ipp_log_likelihood<F: Fn(f64) -> f64>(pattern: &PointPattern, params: &IppParams<F>) -> Result<f64, PatternError> {
    let n = pattern.len() as f64;
    let mut ll = if n > 0.0 { n * log(params.gamma) } else { 0.0 } - params.gamma;
    for &d in &pattern.distances {
        let value = params.density(d);
        if !(value > 0.0) {
            return Err(PatternError::NonpositiveDensity { distance: d, value });
        }
        ll += log(value);
    }
    Ok(ll)
}
