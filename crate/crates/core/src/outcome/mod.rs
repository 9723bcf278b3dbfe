//! Binomial outcome models on top of the clustering: a logistic GLM on
//! cluster labels (consensus or mode labels), a kernel machine regression
//! with a Gaussian process over co-clustering rows, quantity effects and
//! WAIC.

mod bkmr;
mod cglm;
mod glm;
mod gp;
mod mcmc;
mod simulate;
mod waic;

pub use bkmr::{fit_bkmr, quantity_effect_bkmr, BkmrConfig, BkmrFit, BKMR_COEFFICIENTS};
pub use cglm::{
    cglm_linear_predictor, cluster_weights, fit_cglm, fit_glm, quantity_effect_cglm, CglmCoefficients, GlmFit, ZETA_NAMES,
};
pub use glm::{BinomialLogit, Mode};
pub use gp::{cholesky_with_jitter, elliptical_slice, gp_kernel, gram_matrix, FoldedNormal};
pub use mcmc::{summarize_param, McmcConfig, ParamSummary};
pub use simulate::{draw_outcomes, simulate_records, RecordSpec};
pub use waic::{waic, Waic, UNSTABLE_P_WAIC};

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::diagnostics::DiagnosticsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OutcomeError {
    #[error("record {subject}: {reason}")]
    InvalidRecord { subject: String, reason: &'static str },
    #[error("subject {0} has restaurants nearby but no cluster label")]
    MissingClusterLabel(String),
    #[error("subject {0} has restaurants nearby but no co-clustering row")]
    MissingKernelRow(String),
    #[error("design is rank deficient: {coefficient} is a linear combination of earlier columns")]
    RankDeficient { coefficient: String },
    #[error("separation: coefficient {coefficient} diverges")]
    Separation { coefficient: String },
    #[error("kernel matrix is not positive definite even with jitter 1e-5; duplicate rows: {subjects:?}")]
    NonPsdKernel { subjects: Vec<String> },
    #[error("cluster weights must be non-negative and sum to 1")]
    WeightsNotNormalized,
    #[error("no records")]
    Empty,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("no draws")]
    NoDraws,
    #[error("convergence gate failed: split R-hat of {parameter} is {rhat:.4}")]
    NotConverged { parameter: String, rhat: f64 },
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MajorityRace {
    AfricanAmerican,
    Asian,
    Hispanic,
    NoMajority,
    White,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Urbanicity {
    Rural,
    SubUrban,
    Urban,
}

/// School characteristics. All zeros is a suburban, majority-white,
/// non-charter school with average income and education.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Covariates {
    pub majority_race: MajorityRace,
    pub charter: bool,
    /// (tract median income - state median) / 33,000.
    pub income_centered_scaled: f64,
    pub education_centered: f64,
    pub urbanicity: Urbanicity,
}

pub const COVARIATE_NAMES: [&str; 9] = [
    "race_african_american",
    "race_asian",
    "race_hispanic",
    "race_no_majority",
    "charter",
    "income",
    "education",
    "rural",
    "urban",
];

impl Covariates {
    pub const REFERENCE: Covariates = Covariates {
        majority_race: MajorityRace::White,
        charter: false,
        income_centered_scaled: 0.0,
        education_centered: 0.0,
        urbanicity: Urbanicity::SubUrban,
    };

    /// Design row without intercept, in [`COVARIATE_NAMES`] order.
    pub fn vector(&self) -> [f64; 9] {
        let race = |r| (self.majority_race == r) as u8 as f64;
        [
            race(MajorityRace::AfricanAmerican),
            race(MajorityRace::Asian),
            race(MajorityRace::Hispanic),
            race(MajorityRace::NoMajority),
            self.charter as u8 as f64,
            self.income_centered_scaled,
            self.education_centered,
            (self.urbanicity == Urbanicity::Rural) as u8 as f64,
            (self.urbanicity == Urbanicity::Urban) as u8 as f64,
        ]
    }
}

/// Restaurant-count category. `One` is the reference level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum QuantityCategory {
    Zero,
    One,
    Two,
    Three,
    Four,
    FiveToSeven,
    EightPlus,
}

impl QuantityCategory {
    pub const ALL: [QuantityCategory; 7] = [
        QuantityCategory::Zero,
        QuantityCategory::One,
        QuantityCategory::Two,
        QuantityCategory::Three,
        QuantityCategory::Four,
        QuantityCategory::FiveToSeven,
        QuantityCategory::EightPlus,
    ];

    pub fn from_count(n: u64) -> Self {
        match n {
            0 => Self::Zero,
            1 => Self::One,
            2 => Self::Two,
            3 => Self::Three,
            4 => Self::Four,
            5..=7 => Self::FiveToSeven,
            _ => Self::EightPlus,
        }
    }

    /// Position among the six coefficients, `None` for the reference.
    pub fn zeta_index(self) -> Option<usize> {
        match self {
            Self::Zero => Some(0),
            Self::One => None,
            Self::Two => Some(1),
            Self::Three => Some(2),
            Self::Four => Some(3),
            Self::FiveToSeven => Some(4),
            Self::EightPlus => Some(5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Zero => "0",
            Self::One => "1",
            Self::Two => "2",
            Self::Three => "3",
            Self::Four => "4",
            Self::FiveToSeven => "5-7",
            Self::EightPlus => "8+",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutcomeRecord {
    pub subject_id: String,
    pub obese_count: u64,
    pub total_count: u64,
    pub ffr_count: u64,
    pub covariates: Covariates,
}

impl OutcomeRecord {
    pub fn validate(&self) -> Result<(), OutcomeError> {
        let bad = |reason| {
            Err(OutcomeError::InvalidRecord {
                subject: self.subject_id.clone(),
                reason,
            })
        };
        if self.total_count == 0 {
            return bad("total_count must be positive");
        }
        if self.obese_count > self.total_count {
            return bad("obese_count exceeds total_count");
        }
        if !(self.covariates.income_centered_scaled.is_finite() && self.covariates.education_centered.is_finite()) {
            return bad("non-finite covariate");
        }
        Ok(())
    }

    pub fn category(&self) -> QuantityCategory {
        QuantityCategory::from_count(self.ffr_count)
    }
}

/// Posterior draws of a derived probability for one quantity category.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantityEffect {
    pub category: QuantityCategory,
    pub draws: Vec<f64>,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
}

impl QuantityEffect {
    pub(crate) fn from_draws(category: QuantityCategory, draws: Vec<f64>) -> Self {
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        Self {
            category,
            median: crate::stats::quantile_sorted(&sorted, 0.5),
            q025: crate::stats::quantile_sorted(&sorted, 0.025),
            q975: crate::stats::quantile_sorted(&sorted, 0.975),
            draws,
        }
    }
}
