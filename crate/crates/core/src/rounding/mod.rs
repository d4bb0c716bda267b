//! Online rounding of fractional schedules into integral ones.

pub mod loglog;
pub mod partition;
pub mod simple;
pub mod two_eps;

use thiserror::Error;

use crate::instance::JobId;
use crate::matching::MatchingError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoundingError {
    #[error("job {0} is unknown or has weight on a machine it cannot use")]
    UnknownJob(JobId),
    #[error("machine {machine}: load {load} exceeds bound {bound} ({terms})")]
    BoundViolation { machine: usize, load: f64, bound: f64, terms: String },
    #[error("job {job}: no seed index accepted within {tries} draws")]
    SeedExhaustion { job: JobId, tries: usize },
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

/// Per-step outcome shared by the rounding schemes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Previously assigned jobs whose machine changed.
    pub reassignments: u64,
    /// Partner changes inside the matching (may stay on the same machine).
    pub matching_moves: u64,
    /// `Σ_v |b_new(v) − b_old(v)|`.
    pub capacity_change: u64,
    /// Right-vertex inserts plus deletes.
    pub vertex_updates: u64,
    /// `Σ_ij |x_new − x_old|` over the rows examined.
    pub fractional_change: f64,
    pub makespan: f64,
}
