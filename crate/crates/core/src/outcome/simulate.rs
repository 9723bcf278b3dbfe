use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};

use super::{Covariates, MajorityRace, OutcomeError, OutcomeRecord, Urbanicity};
use crate::rng::{self, Tag};
use crate::stats::inv_logit;

/// Layout of a synthetic school-level outcome dataset.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct RecordSpec {
    pub n_schools: usize,
    pub students: u64,
    /// Share of schools without restaurants nearby.
    pub zero_fraction: f64,
    /// Restaurant counts of the other schools are uniform on `1..=max_ffr`.
    pub max_ffr: u64,
    /// Draw covariates; otherwise every school is the reference school.
    pub random_covariates: bool,
    pub seed: u64,
}

impl Default for RecordSpec {
    fn default() -> Self {
        Self {
            n_schools: 200,
            students: 300,
            zero_fraction: 0.3,
            max_ffr: 10,
            random_covariates: false,
            seed: 0,
        }
    }
}

const RACES: [MajorityRace; 5] = [
    MajorityRace::AfricanAmerican,
    MajorityRace::Asian,
    MajorityRace::Hispanic,
    MajorityRace::NoMajority,
    MajorityRace::White,
];
const URBAN: [Urbanicity; 3] = [Urbanicity::Rural, Urbanicity::SubUrban, Urbanicity::Urban];

/// Records with ids `school0001, ...` and zero obese counts; fill the
/// outcomes with [`draw_outcomes`].
pub fn simulate_records(spec: &RecordSpec) -> Result<Vec<OutcomeRecord>, OutcomeError> {
    if spec.n_schools == 0 || spec.students == 0 || spec.max_ffr == 0 || !(0.0..=1.0).contains(&spec.zero_fraction) {
        return Err(OutcomeError::InvalidConfig("record spec needs schools, students, max_ffr > 0 and zero_fraction in [0, 1]"));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok((0..spec.n_schools)
        .map(|i| {
            let mut r = rng::tagged(spec.seed, Tag::Simulate, i as u64, 1, 0);
            let ffr_count = if r.random::<f64>() < spec.zero_fraction {
                0
            } else {
                r.random_range(1..=spec.max_ffr)
            };
            let covariates = if spec.random_covariates {
                Covariates {
                    majority_race: RACES[r.random_range(0..RACES.len())],
                    charter: r.random::<f64>() < 0.1,
                    income_centered_scaled: std_normal.sample(&mut r),
                    education_centered: 0.1 * std_normal.sample(&mut r),
                    urbanicity: URBAN[r.random_range(0..URBAN.len())],
                }
            } else {
                Covariates::REFERENCE
            };
            OutcomeRecord {
                subject_id: format!("school{:04}", i + 1),
                obese_count: 0,
                total_count: spec.students,
                ffr_count,
                covariates,
            }
        })
        .collect())
}

/// Replaces each obese count with a Binomial(total, logit^-1(eta_i)) draw.
pub fn draw_outcomes(records: &mut [OutcomeRecord], eta: &[f64], seed: u64) -> Result<(), OutcomeError> {
    if records.len() != eta.len() {
        return Err(OutcomeError::InvalidConfig("one linear predictor per record"));
    }
    for (i, (rec, &e)) in records.iter_mut().zip(eta).enumerate() {
        let mut r = rng::tagged(seed, Tag::Simulate, i as u64, 1, 1);
        let b = Binomial::new(rec.total_count, inv_logit(e)).map_err(|_| OutcomeError::InvalidRecord {
            subject: rec.subject_id.clone(),
            reason: "linear predictor is not finite",
        })?;
        rec.obese_count = b.sample(&mut r);
    }
    Ok(())
}
