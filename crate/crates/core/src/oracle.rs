//! Ground-truth computations for tests: T*, the offline flow optimum C*,
//! brute-force makespan and exhaustive augmenting-structure enumeration.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use num_rational::BigRational;
use thiserror::Error;

use crate::genflow::{AugmentingStructure, FlowError, FlowNetwork, ResidualEdge, VertexId, VertexKind, SINK};
use crate::instance::{FractionalAssignment, JobSet, MachineId};
use crate::lp::{LinearProgram, LpError, Relation, Scalar, Sense};

pub const MAX_ENUMERATION_VERTICES: usize = 12;
pub const MAX_BRUTE_ASSIGNMENTS: f64 = 1e7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("job {0} has no admissible machine")]
    NoMachine(u64),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("sparse LP: {0}")]
    Sparse(String),
}

/// Every augmenting structure from `s`: simple paths to τ, absorbing simple
/// cycles through `s`, and lollipops (simple stem plus a disjoint absorbing
/// cycle), in depth-first order of the residual edge list.
pub fn enumerate_structures(n: usize, residual: &[ResidualEdge], s: VertexId) -> Result<Vec<AugmentingStructure>, FlowError> {
    if n > MAX_ENUMERATION_VERTICES {
        return Err(FlowError::TooLarge { got: n, max: MAX_ENUMERATION_VERTICES });
    }
    if s == SINK || s >= n {
        return Err(FlowError::InvalidSource(s));
    }
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, r) in residual.iter().enumerate() {
        out[r.from].push(k);
    }
    let mut found = Vec::new();
    let mut on_path = vec![false; n];
    let mut walk = Vec::new();
    on_path[s] = true;
    dfs(s, residual, &out, &mut on_path, &mut walk, &mut found, s);
    Ok(found)
}

fn dfs(
    v: VertexId,
    residual: &[ResidualEdge],
    out: &[Vec<usize>],
    on_path: &mut [bool],
    walk: &mut Vec<ResidualEdge>,
    found: &mut Vec<AugmentingStructure>,
    s: VertexId,
) {
    for &k in &out[v] {
        let arc = residual[k];
        walk.push(arc);
        if arc.to == SINK || on_path[arc.to] {
            if let Some(f) = AugmentingStructure::from_walk(s, walk) {
                found.push(f);
            }
        } else {
            on_path[arc.to] = true;
            dfs(arc.to, residual, out, on_path, walk, found, s);
            on_path[arc.to] = false;
        }
        walk.pop();
    }
}

/// Minimum-cost structure; ties go to the lexicographically smallest arc sequence.
pub fn cheapest_of(all: Vec<AugmentingStructure>) -> Option<AugmentingStructure> {
    let key = |f: &AugmentingStructure| f.arcs.iter().map(|(a, _)| (a.edge, a.dir)).collect::<Vec<_>>();
    all.into_iter().min_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| key(a).cmp(&key(b))))
}

#[derive(Clone, Debug)]
pub struct TStar<T> {
    pub value: T,
    /// An optimal fractional schedule with makespan ≤ T* on edges with p ≤ T*.
    pub x: FractionalAssignment,
}

/// Smallest T for which the assignment LP restricted to edges with p ≤ T has
/// a fractional schedule of makespan ≤ T.
pub fn compute_t_star(jobs: &JobSet) -> Result<TStar<f64>, OracleError> {
    t_star_search(jobs, min_makespan_sparse)
}

/// [`compute_t_star`] in exact rational arithmetic.
pub fn compute_t_star_exact(jobs: &JobSet) -> Result<TStar<BigRational>, OracleError> {
    t_star_search(jobs, min_makespan_lp::<BigRational>)
}

fn t_star_search<T: Scalar>(jobs: &JobSet, solve: impl Fn(&JobSet, f64) -> Result<(T, FractionalAssignment), OracleError>) -> Result<TStar<T>, OracleError> {
    if jobs.is_empty() {
        return Ok(TStar { value: T::zero(), x: FractionalAssignment::new() });
    }
    let mut crit: Vec<f64> = jobs.iter().flat_map(|j| j.procs.iter().map(|&(_, p)| p)).collect();
    crit.sort_by(f64::total_cmp);
    crit.dedup();
    // The smallest threshold at which every job has an edge.
    let floor = jobs.iter().map(|j| j.procs.iter().map(|&(_, p)| p).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let first = crit.iter().position(|&c| c >= floor).expect("floor is a critical value");
    // Predicate: LPopt(E_k) ≤ c_{k+1}; monotone in k.
    let mut lo = first;
    let mut hi = crit.len() - 1;
    let mut best: Option<(usize, T, FractionalAssignment)> = None;
    while lo <= hi {
        let mid = lo + (hi - lo) / 2;
        let (opt, x) = solve(jobs, crit[mid])?;
        let next = crit.get(mid + 1).copied().unwrap_or(f64::INFINITY);
        if opt.to_f64() <= next * (1.0 + 1e-9) {
            best = Some((mid, opt, x));
            if mid == first {
                break;
            }
            hi = mid - 1;
        } else {
            lo = mid + 1;
        }
    }
    let (k, opt, x) = best.expect("the full edge set always satisfies the predicate");
    let ck = T::from_f64(crit[k]);
    let value = if opt > ck { opt } else { ck };
    Ok(TStar { value, x })
}

/// `min T` over fractional schedules using only edges with `p ≤ threshold`.
fn min_makespan_lp<T: Scalar>(jobs: &JobSet, threshold: f64) -> Result<(T, FractionalAssignment), OracleError> {
    let m = jobs.num_machines;
    let mut vars: Vec<(u64, MachineId, f64)> = Vec::new();
    for j in jobs.iter() {
        for &(i, p) in &j.procs {
            if p <= threshold {
                vars.push((j.id, i, p));
            }
        }
    }
    let t_var = vars.len();
    let mut obj = vec![T::zero(); vars.len()];
    obj.push(T::one());
    let mut lp = LinearProgram::new(Sense::Minimize, obj);
    let mut k = 0;
    for j in jobs.iter() {
        let start = k;
        while k < vars.len() && vars[k].0 == j.id {
            k += 1;
        }
        if start == k {
            return Err(OracleError::NoMachine(j.id));
        }
        lp.add_constraint((start..k).map(|v| (v, T::one())).collect(), Relation::Eq, T::one());
    }
    let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); m];
    for (v, &(_, i, p)) in vars.iter().enumerate() {
        rows[i.0].push((v, T::from_f64(p)));
    }
    for mut row in rows.into_iter().filter(|r| !r.is_empty()) {
        row.push((t_var, -T::one()));
        lp.add_constraint(row, Relation::Le, T::zero());
    }
    let sol = lp.solve()?;
    let mut x = FractionalAssignment::new();
    for (v, &(j, i, _)) in vars.iter().enumerate() {
        let w = sol.x[v].to_f64();
        x.touch(j);
        if w > 1e-12 {
            x.set(j, i, w);
        }
    }
    Ok((sol.objective, x))
}

/// [`min_makespan_lp`] on the sparse solver; rows are cleaned of round-off
/// and renormalised.
fn min_makespan_sparse(jobs: &JobSet, threshold: f64) -> Result<(f64, FractionalAssignment), OracleError> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t_var = lp.add_var(1.0, (0.0, f64::INFINITY));
    let mut vars = Vec::new();
    let mut rows: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); jobs.num_machines];
    for j in jobs.iter() {
        let mut row = Vec::new();
        for &(i, p) in j.procs.iter().filter(|&&(_, p)| p <= threshold) {
            let v = lp.add_var(0.0, (0.0, f64::INFINITY));
            row.push((v, 1.0));
            rows[i.0].push((v, p));
            vars.push((j.id, i, v));
        }
        if row.is_empty() {
            return Err(OracleError::NoMachine(j.id));
        }
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, 1.0);
    }
    for mut row in rows.into_iter().filter(|r| !r.is_empty()) {
        row.push((t_var, -1.0));
        lp.add_constraint(row.as_slice(), ComparisonOp::Le, 0.0);
    }
    let sol = lp
        .solve()
        .map_err(|e| OracleError::Sparse(e.to_string()))?
        .into_solution()
        .map_err(|_| OracleError::Sparse("interrupted".into()))?;
    let mut x = FractionalAssignment::new();
    for &(j, i, v) in &vars {
        x.touch(j);
        let w = sol.var_value(v);
        if w > 1e-12 {
            x.set(j, i, w);
        }
    }
    for j in jobs.ids() {
        let s = x.row_sum(j);
        let row: Vec<(MachineId, f64)> = x.row(j).collect();
        for (i, w) in row {
            x.set(j, i, w / s);
        }
    }
    let loads = x.loads(jobs);
    Ok((loads.into_iter().fold(0.0, f64::max).max(sol.objective()), x))
}

/// A fractional schedule of makespan at most `t` using edges with `p ≤ t`,
/// or `None` if none exists.
pub fn fractional_schedule(jobs: &JobSet, t: f64) -> Result<Option<FractionalAssignment>, OracleError> {
    match min_makespan_sparse(jobs, t) {
        Ok((opt, x)) if opt <= t * (1.0 + 1e-9) + 1e-12 => Ok(Some(x)),
        Ok(_) | Err(OracleError::NoMachine(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Optimum of the offline flow LP with finite capacities multiplied by `scale`;
/// returns the cost and the flow.
pub fn offline_genflow_opt(net: &FlowNetwork, scale: f64) -> Result<(f64, Vec<f64>), OracleError> {
    let scaled = net.scaled(scale);
    let mut lp = LinearProgram::new(Sense::Minimize, scaled.edges().iter().map(|e| e.cost).collect());
    for (k, e) in scaled.edges().iter().enumerate() {
        if e.capacity.is_finite() {
            lp.set_upper(k, e.capacity);
        }
    }
    for v in 1..scaled.num_vertices() {
        let mut row: Vec<(usize, f64)> = scaled.out_edges(v).iter().map(|&e| (e, 1.0)).collect();
        row.extend(scaled.in_edges(v).iter().map(|&e| (e, -scaled.edge(e).gain)));
        let rhs = if scaled.kind(v) == VertexKind::Source { 1.0 } else { 0.0 };
        if row.is_empty() {
            continue;
        }
        lp.add_constraint(row, Relation::Eq, rhs);
    }
    let sol = lp.solve()?;
    Ok((sol.objective, sol.x))
}

/// Exhaustive optimal integral makespan.
pub fn brute_makespan(jobs: &JobSet) -> Result<f64, OracleError> {
    let count: f64 = jobs.iter().map(|j| j.procs.len() as f64).product();
    let bound = (jobs.num_machines as f64).powi(jobs.len() as i32);
    if count.min(bound) > MAX_BRUTE_ASSIGNMENTS {
        return Err(OracleError::TooLarge(format!("{count} assignments")));
    }
    let list: Vec<&[(MachineId, f64)]> = jobs.iter().map(|j| j.procs.as_slice()).collect();
    let mut loads = vec![0.0; jobs.num_machines];
    let mut best = f64::INFINITY;
    brute(&list, 0, &mut loads, 0.0, &mut best);
    Ok(best)
}

fn brute(list: &[&[(MachineId, f64)]], k: usize, loads: &mut [f64], cur: f64, best: &mut f64) {
    if cur >= *best {
        return;
    }
    if k == list.len() {
        *best = cur;
        return;
    }
    for &(i, p) in list[k] {
        loads[i.0] += p;
        brute(list, k + 1, loads, cur.max(loads[i.0]), best);
        loads[i.0] -= p;
    }
}
