//! LP formulations over the residual graph, solved with the bundled simplex.

use super::network::{VertexId, SINK};
use super::residual::{AugmentingStructure, ResidualEdge};
use super::FlowError;
use crate::lp::{LinearProgram, Relation, Sense};

/// `min Σ c f` with excess `supply` at `s` and zero at every other non-sink
/// vertex; residual capacities are enforced when `capacitated`.
pub fn min_cost_residual_flow(
    n: usize,
    residual: &[ResidualEdge],
    s: VertexId,
    supply: f64,
    capacitated: bool,
) -> Result<(Vec<f64>, f64), FlowError> {
    let mut lp = LinearProgram::new(Sense::Minimize, residual.iter().map(|r| r.cost).collect());
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, r) in residual.iter().enumerate() {
        rows[r.from].push((k, 1.0));
        rows[r.to].push((k, -r.gain));
        if capacitated && r.capacity.is_finite() {
            lp.set_upper(k, r.capacity);
        }
    }
    for (v, row) in rows.into_iter().enumerate() {
        if v == SINK || row.is_empty() {
            continue;
        }
        lp.add_constraint(row, Relation::Eq, if v == s { supply } else { 0.0 });
    }
    let sol = lp.solve()?;
    Ok((sol.x, sol.objective))
}

/// Cheapest structure via the uncapacitated LP; the basic optimum is traced
/// back into a walk from `s`.
pub fn cheapest_by_lp(n: usize, residual: &[ResidualEdge], s: VertexId) -> Result<Option<AugmentingStructure>, FlowError> {
    let (f, _) = min_cost_residual_flow(n, residual, s, 1.0, false)?;
    let mut walk = Vec::new();
    let mut seen = vec![false; n];
    let mut v = s;
    while v != SINK && !seen[v] {
        seen[v] = true;
        let best = residual
            .iter()
            .enumerate()
            .filter(|(k, r)| r.from == v && f[*k] > 1e-12)
            .max_by(|a, b| f[a.0].total_cmp(&f[b.0]).then(b.0.cmp(&a.0)));
        let Some((_, r)) = best else { return Ok(None) };
        walk.push(*r);
        v = r.to;
    }
    Ok(AugmentingStructure::from_walk(s, &walk))
}

/// Heights of all vertices as the greatest solution of
/// `y_u − γ y_v ≤ c` over residual edges, `y_τ = 0`.
pub fn heights_by_lp(n: usize, residual: &[ResidualEdge]) -> Result<Vec<f64>, FlowError> {
    // Variable v−1 is y_v.
    let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0; n - 1]);
    for r in residual {
        let mut row = Vec::with_capacity(2);
        if r.from != SINK {
            row.push((r.from - 1, 1.0));
        }
        if r.to != SINK {
            row.push((r.to - 1, -r.gain));
        }
        lp.add_constraint(row, Relation::Le, r.cost);
    }
    let sol = lp.solve()?;
    let mut y = vec![0.0];
    y.extend(sol.x);
    Ok(y)
}
