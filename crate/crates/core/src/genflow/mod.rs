//! Online generalized network flow: sources arrive one at a time and each
//! sends one unit to the sink along cheapest augmenting structures.

mod dual;
mod engine;
pub mod lp_route;
mod network;
pub mod policy;
mod residual;

pub use dual::{dual_certificate, DualReport};
pub use engine::{FlowWarning, Mode, OnlineFlow, StepRecord};
pub use network::{dummy_cost_formula, Edge, EdgeId, EdgeSpec, FlowNetwork, VertexId, VertexKind, DUMMY_COST_CAP, SINK};
pub use residual::{augment, max_step, residual, AugmentingStructure, Direction, ResidualEdge, StructureKind, SNAP_TOL};

use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("edge {edge} carries {flow} outside [0, {capacity}]")]
    CapacityViolation { edge: EdgeId, flow: f64, capacity: f64 },
    #[error("edge {from}->{to} would be anti-parallel to an existing edge")]
    AntiParallel { from: VertexId, to: VertexId },
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("vertex {0} cannot start an augmentation")]
    InvalidSource(VertexId),
    #[error("augmentation step {0:e} is degenerate")]
    DegenerateStep(f64),
    #[error("structure enumeration needs at most {max} vertices, got {got}")]
    TooLarge { got: usize, max: usize },
    #[error("dual certificate violated: {}", .0.join("; "))]
    CertificateViolation(Vec<String>),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// How the cheapest augmenting structure is found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Solver {
    /// Policy iteration on the height equations.
    #[default]
    Policy,
    /// Uncapacitated residual LP with the bundled simplex.
    Lp,
    /// Exhaustive structure enumeration (at most 12 vertices).
    Enumerate,
}

pub fn cheapest_augmentation(net: &FlowNetwork, x: &[f64], s: VertexId, solver: Solver) -> Result<AugmentingStructure, FlowError> {
    if s == SINK || s >= net.num_vertices() {
        return Err(FlowError::InvalidSource(s));
    }
    let res = residual(net, x)?;
    cheapest_in_residual(net.num_vertices(), &res, s, solver)
}

/// Cheapest structure from `s` in an explicit residual graph on `n` vertices
/// (vertex 0 is the sink; every other vertex needs an edge to it).
pub fn cheapest_in_residual(n: usize, res: &[ResidualEdge], s: VertexId, solver: Solver) -> Result<AugmentingStructure, FlowError> {
    if s == SINK || s >= n {
        return Err(FlowError::InvalidSource(s));
    }
    match solver {
        Solver::Policy => Ok(policy::solve(n, res).structure_from(res, s)),
        Solver::Lp => match lp_route::cheapest_by_lp(n, res, s)? {
            Some(f) => Ok(f),
            None => Ok(policy::solve(n, res).structure_from(res, s)),
        },
        Solver::Enumerate => {
            let all = crate::oracle::enumerate_structures(n, res, s)?;
            Ok(crate::oracle::cheapest_of(all).expect("the dummy edge always yields a structure"))
        }
    }
}

/// Height of every vertex; `heights[SINK] = 0`.
pub fn heights(net: &FlowNetwork, x: &[f64]) -> Result<Vec<f64>, FlowError> {
    let res = residual(net, x)?;
    Ok(policy::solve(net.num_vertices(), &res).heights)
}

pub fn height(net: &FlowNetwork, x: &[f64], v: VertexId) -> Result<f64, FlowError> {
    if v == SINK {
        return Ok(0.0);
    }
    Ok(heights(net, x)?[v])
}
