//! Seeded Monte Carlo experiments.
//!
//! Replica `r` of an experiment with master seed `s` draws everything (its
//! initial configuration, tree boundary, coins and clock events) from
//! [`replica_rng(s, r)`](crate::seeding::replica_rng), so every estimate can
//! be recomputed exactly from `(s, spec)` and does not depend on how the
//! replicas are scheduled.

mod classify;
mod convergence;
mod report;
mod suite;

pub use classify::{
    aggregate_e, estimate_err_curve, estimate_q, identity_control, maj5_negative_control, ControlReport,
    EAggregate, ErrCurve, ErrPoint, ErrSpec, QEstimate, QSpec, RunRecord,
};
pub use convergence::{
    convergence_experiment, ConvergenceKind, ConvergenceReport, ConvergenceSpec, LayerCheck, RootRow,
};
pub use report::{ExperimentReport, ReportMeta, ReportRow, CSV_HEADER, CSV_MAGIC};
pub use suite::{invariance_suite, CheckOutcome, SuiteOptions, SuiteReport};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::configuration::ConfigError;
use crate::engine::EngineError;
use crate::rules::RuleError;
use crate::topology::TopologyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Invalid(String),
}

/// `f(0), f(1), ..., f(count - 1)` in index order, computed in parallel when
/// the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn replicas<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn replicas<T, F>(count: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..count).map(f).collect()
}
