//! Execution strategy for embarrassingly parallel loops.
//!
//! The core crate never spawns threads. Loops whose iterations are
//! independent (per-subject indicator draws, per-draw density evaluations)
//! go through an [`Executor`]; [`Sequential`] is the in-crate
//! implementation and the `ndpc` crate supplies a thread-pool one. Results
//! are always collected in index order.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0), ..., f(len - 1)` and returns the results in order.
    fn map_indexed<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}
