//! Nested Dirichlet process clustering of one-dimensional point patterns.
//!
//! The crate covers the whole two-stage pipeline without touching IO:
//!
//! * [`pattern`]: point patterns of distances, the probit transform onto the
//!   real line and the inhomogeneous Poisson process likelihood.
//! * [`ndp`]: a truncated blocked Gibbs sampler for the nested Dirichlet
//!   process mixture of normals over transformed distances.
//! * [`summary`]: co-clustering probabilities, variation-of-information
//!   point estimates with credible-ball bounds, consensus labels and
//!   back-transformed density curves.
//! * [`outcome`]: binomial outcome regressions on cluster labels (consensus
//!   GLM) and on co-clustering rows through a Gaussian process (kernel
//!   machine regression), quantity effects and WAIC.
//! * [`diagnostics`]: split R-hat, effective sample size and the
//!   Raftery-Lewis run-length diagnostic.
//! * [`synth`]: synthetic scenarios and clustering losses.
//!
//! Everything is `no_std` with `alloc`; the `ndpc` crate adds files, threads
//! and the command line.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod exec;
pub mod ndp;
pub mod normal;
pub mod outcome;
pub mod pattern;
pub mod rng;
pub mod stats;
pub mod summary;
pub mod synth;

pub use exec::{Executor, Sequential};
pub use pattern::{inverse_probit, ipp_log_likelihood, probit_transform, IppParams, PointPattern, TransformedPattern};
