//! Experiment drivers behind the command-line tool.
//!
//! Every driver is a pure function of an [`ExperimentConfig`] (which includes
//! the master seed): random streams are derived per job from the seed, and
//! rows are returned in sorted order whatever the worker count.

pub mod bounds;
pub mod config;
pub mod csv;
pub mod report;
pub mod sweep;
pub mod train;

pub use bounds::{run_bound_checks, BoundRow};
pub use config::{ExperimentConfig, HName, InitialSpec, Quantization, TransitionSource};
pub use report::run_regularity_report;
pub use sweep::{run_error_sweep, SweepRow};
pub use train::{train_transition, Trained};

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `jobs` worker threads (0 means one per
/// logical core).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}
