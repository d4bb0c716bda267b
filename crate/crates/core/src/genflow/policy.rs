//! Policy iteration for the height system `y_u = min_e (c_e + γ_e y_v)`,
//! `y_τ = 0`, over residual edges.
//!
//! Every policy keeps one residual out-edge per vertex, so the policy graph
//! from any vertex is a path to τ, a cycle back to it, or a lollipop. A switch
//! is made only on strict improvement, which never closes a cycle with gain
//! ≥ 1 because costs are non-negative; values therefore stay finite and
//! decrease monotonically until the Bellman equations hold.

use super::network::{VertexId, SINK};
use super::residual::{AugmentingStructure, ResidualEdge};

const MAX_ROUNDS: usize = 100_000;

#[derive(Clone, Debug)]
pub struct HeightSolution {
    pub heights: Vec<f64>,
    /// Index into the residual edge list of each vertex's chosen edge.
    pub policy: Vec<Option<usize>>,
    pub rounds: usize,
}

impl HeightSolution {
    /// Follows the policy from `s` and returns the traced structure.
    pub fn structure_from(&self, residual: &[ResidualEdge], s: VertexId) -> AugmentingStructure {
        let mut walk = Vec::new();
        let mut seen = vec![false; self.policy.len()];
        let mut v = s;
        while v != SINK && !seen[v] {
            seen[v] = true;
            let arc = residual[self.policy[v].expect("every non-sink vertex has a policy edge")];
            walk.push(arc);
            v = arc.to;
        }
        AugmentingStructure::from_walk(s, &walk).expect("policy graph only contains absorbing cycles")
    }
}

fn improvement_tol(y: f64) -> f64 {
    1e-12 * (1.0 + y.abs())
}

/// Heights of every vertex with respect to the given residual graph.
///
/// Every non-sink vertex must have a residual edge straight to the sink (the
/// dummy edges guarantee this); those edges seed the first policy.
pub fn solve(n: usize, residual: &[ResidualEdge]) -> HeightSolution {
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, r) in residual.iter().enumerate() {
        out[r.from].push(k);
    }
    let mut policy: Vec<Option<usize>> = vec![None; n];
    for v in 1..n {
        policy[v] = out[v].iter().copied().filter(|&k| residual[k].to == SINK).min_by(|&a, &b| residual[a].cost.total_cmp(&residual[b].cost));
        assert!(policy[v].is_some(), "vertex {v} has no residual edge to the sink");
    }
    let mut y = evaluate(residual, &policy);
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mut changed = false;
        for u in 1..n {
            let cur = y[u];
            let mut best: Option<(usize, f64)> = None;
            for &k in &out[u] {
                let r = &residual[k];
                let val = r.cost + r.gain * y[r.to];
                if val < cur - improvement_tol(cur) && best.is_none_or(|(_, b)| val < b) {
                    best = Some((k, val));
                }
            }
            if let Some((k, _)) = best {
                policy[u] = Some(k);
                changed = true;
            }
        }
        if !changed || rounds >= MAX_ROUNDS {
            break;
        }
        y = evaluate(residual, &policy);
    }
    HeightSolution { heights: y, policy, rounds }
}

/// Values of a fixed policy: back-substitution along paths, closed form on cycles.
fn evaluate(residual: &[ResidualEdge], policy: &[Option<usize>]) -> Vec<f64> {
    let n = policy.len();
    let mut y = vec![f64::NAN; n];
    // 0 = unvisited, 1 = on the current chain, 2 = done.
    let mut state = vec![0u8; n];
    y[SINK] = 0.0;
    state[SINK] = 2;
    let mut chain: Vec<VertexId> = Vec::new();
    for start in 1..n {
        if state[start] == 2 {
            continue;
        }
        chain.clear();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            chain.push(v);
            v = residual[policy[v].expect("policy edge")].to;
        }
        let mut resolved = chain.len();
        if state[v] == 1 {
            // Closed a cycle: chain[pos..] returns to v.
            let pos = chain.iter().position(|&u| u == v).unwrap();
            let mut c_sum = 0.0;
            let mut g = 1.0;
            for &u in &chain[pos..] {
                let r = &residual[policy[u].unwrap()];
                c_sum += g * r.cost;
                g *= r.gain;
            }
            debug_assert!(g < 1.0, "policy closed a non-absorbing cycle");
            y[v] = c_sum / (1.0 - g);
            state[v] = 2;
            for &u in chain[pos + 1..].iter().rev() {
                let r = &residual[policy[u].unwrap()];
                y[u] = r.cost + r.gain * y[r.to];
                state[u] = 2;
            }
            resolved = pos;
        }
        for &u in chain[..resolved].iter().rev() {
            let r = &residual[policy[u].unwrap()];
            y[u] = r.cost + r.gain * y[r.to];
            state[u] = 2;
        }
    }
    y
}
