//! Files, threads and the command line around `ndpc-core`.

pub mod cli;
pub mod error;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod stream;

pub use error::{Error, Result};
pub use exec::RayonExecutor;
