//! Fully dynamic lower-bound instance on a binary tree of machines, with a
//! weighted recourse auditor.
//!
//! Vertices are heap-indexed: the root is 1, the children of `v` are `2v`
//! and `2v+1`, and the leaves are `2^L .. 2^{L+1}`. Level is `L − depth`.
//! Leaf `u` owns machines `2(u − 2^L)` and `2(u − 2^L) + 1`.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{Assignment, Event, EventTrace, FractionalAssignment, Job, JobId, MachineId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("need L ≥ 1 and P ≥ 2^L, got L = {levels}, P = {p}")]
    Parameter { levels: u32, p: u64 },
    #[error("schedule log has {got} entries for {want} events")]
    LogGap { got: usize, want: usize },
    #[error("vertex {vertex}: {reason}")]
    Support { vertex: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LbTree {
    pub levels: u32,
    pub p: u64,
}

impl LbTree {
    pub fn new(levels: u32, p: u64) -> Result<Self, AdversaryError> {
        if levels == 0 || levels > 20 || p < 1u64 << levels {
            return Err(AdversaryError::Parameter { levels, p });
        }
        Ok(LbTree { levels, p })
    }

    pub fn num_vertices(&self) -> usize {
        (1usize << (self.levels + 1)) - 1
    }

    pub fn num_leaves(&self) -> usize {
        1 << self.levels
    }

    pub fn num_machines(&self) -> usize {
        2 * self.num_leaves()
    }

    pub fn level(&self, v: usize) -> u32 {
        self.levels - v.ilog2()
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v >= self.num_leaves()
    }

    /// Leaf positions `0..2^L` below `v`.
    pub fn leaves_below(&self, v: usize) -> std::ops::Range<usize> {
        let l = self.level(v);
        let first = (v << l) - self.num_leaves();
        first..first + (1 << l)
    }

    pub fn machines_below(&self, v: usize) -> std::ops::Range<usize> {
        let r = self.leaves_below(v);
        2 * r.start..2 * r.end
    }

    /// `c_{j_v} = P^{ℓ(v)}`.
    pub fn cost(&self, v: usize) -> f64 {
        (self.p as f64).powi(self.level(v) as i32)
    }

    /// Executions of the recursive procedure at `v`: `P^{L−ℓ(v)}`.
    pub fn executions(&self, v: usize) -> u64 {
        self.p.pow(self.levels - self.level(v))
    }

    pub fn total_arrivals(&self) -> u64 {
        (1..=self.num_vertices()).map(|v| (1u64 << self.level(v)) * self.executions(v)).sum()
    }

    /// `Σ_j c_j` over all arrivals.
    pub fn total_cost(&self) -> f64 {
        (1..=self.num_vertices()).map(|v| (1u64 << self.level(v)) as f64 * self.executions(v) as f64 * self.cost(v)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct LbInstance {
    pub tree: LbTree,
    pub trace: EventTrace,
    /// Tree vertex of every job copy.
    pub vertex_of: BTreeMap<JobId, usize>,
}

pub fn build_trace(levels: u32, p: u64) -> Result<LbInstance, AdversaryError> {
    let tree = LbTree::new(levels, p)?;
    let mut events = Vec::new();
    let mut vertex_of = BTreeMap::new();
    construct(&tree, 1, &mut events, &mut vertex_of);
    let machines = (0..tree.num_machines()).map(|i| format!("m{i}")).collect();
    let trace = EventTrace::new(machines, events).expect("generated trace is valid");
    Ok(LbInstance { tree, trace, vertex_of })
}

fn construct(tree: &LbTree, v: usize, events: &mut Vec<Event>, vertex_of: &mut BTreeMap<JobId, usize>) {
    let copies = 1usize << tree.level(v);
    let procs: Vec<(MachineId, f64)> = tree.machines_below(v).map(|i| (MachineId(i), 1.0)).collect();
    let mut ids = Vec::with_capacity(copies);
    for _ in 0..copies {
        let id = vertex_of.len() as JobId;
        vertex_of.insert(id, v);
        ids.push(id);
        events.push(Event::Arrive(Job::new(id, procs.clone()).unwrap().with_cost(tree.cost(v))));
    }
    if !tree.is_leaf(v) {
        for _ in 0..tree.p {
            construct(tree, 2 * v, events, vertex_of);
            construct(tree, 2 * v + 1, events, vertex_of);
        }
    }
    events.extend(ids.into_iter().map(Event::Depart));
}

impl LbInstance {
    /// Makespan-1 schedule of the jobs active after `t` events: copies of a
    /// strict ancestor go to the sibling subtree off the active path, the
    /// deepest vertex's copies go below itself.
    pub fn witness(&self, t: usize) -> Assignment {
        let active = self.trace.active_after(t);
        let mut by_vertex: BTreeMap<usize, Vec<JobId>> = BTreeMap::new();
        for j in active.ids() {
            by_vertex.entry(self.vertex_of[&j]).or_default().push(j);
        }
        let mut sigma = Assignment::new();
        let Some(&deepest) = by_vertex.keys().max() else { return sigma };
        for (&v, copies) in &by_vertex {
            let machines = if v == deepest {
                self.tree.machines_below(v).step_by(2).collect::<Vec<_>>()
            } else {
                let shift = deepest.ilog2() - v.ilog2();
                let on_path = deepest >> (shift - 1);
                let off = on_path ^ 1;
                self.tree.machines_below(off).collect()
            };
            for (&j, &i) in copies.iter().zip(&machines) {
                sigma.assign(j, MachineId(i));
            }
        }
        sigma
    }

    /// Per-event schedule log of the strategy `f`: on arrival the copies
    /// of `j_v` are spread by `f_v`; before each further loop iteration they
    /// are brought back in full and trimmed again.
    pub fn strategy_log(&self, f: &Strategy) -> Result<Vec<FractionalAssignment>, AdversaryError> {
        check_strategy(&self.tree, f)?;
        let tree = &self.tree;
        let trimmed = |v: usize| -> Vec<(MachineId, f64)> {
            let copies = (1u64 << tree.level(v)) as f64;
            tree.leaves_below(v)
                .zip(&f[v])
                .flat_map(|(u, &w)| [(MachineId(2 * u), w / copies / 2.0), (MachineId(2 * u + 1), w / copies / 2.0)])
                .collect()
        };
        let full = |v: usize| -> Vec<(MachineId, f64)> {
            let row = trimmed(v);
            let rest = 1.0 - row.iter().map(|(_, w)| w).sum::<f64>();
            let k = row.len() as f64;
            row.into_iter().map(|(i, w)| (i, w + rest / k)).collect()
        };
        let mut x = FractionalAssignment::new();
        let mut log = Vec::with_capacity(self.trace.len());
        let mut live: BTreeMap<usize, Vec<JobId>> = BTreeMap::new();
        // Vertex whose child subtree just finished: its copies are restored.
        let mut restored: Option<usize> = None;
        let set_row = |x: &mut FractionalAssignment, j: JobId, row: &[(MachineId, f64)]| {
            x.remove_job(j);
            x.touch(j);
            for &(i, w) in row {
                x.set(j, i, w);
            }
        };
        for ev in &self.trace.events {
            match ev {
                Event::Arrive(job) => {
                    let v = self.vertex_of[&job.id];
                    if let Some(r) = restored.take() {
                        for &j in &live[&r] {
                            set_row(&mut x, j, &trimmed(r));
                        }
                    }
                    live.entry(v).or_default().push(job.id);
                    set_row(&mut x, job.id, &trimmed(v));
                }
                Event::Depart(id) => {
                    let v = self.vertex_of[id];
                    x.remove_job(*id);
                    let copies = live.get_mut(&v).unwrap();
                    copies.retain(|j| j != id);
                    if copies.is_empty() {
                        live.remove(&v);
                        // End of an iteration of the parent's loop.
                        if v > 1 && v % 2 == 1 {
                            let parent = v / 2;
                            for &j in &live[&parent] {
                                set_row(&mut x, j, &full(parent));
                            }
                            restored = Some(parent);
                        }
                    }
                }
            }
            log.push(x.clone());
        }
        Ok(log)
    }
}

/// Weighted recourse of a per-event schedule log: a persisting job pays
/// `c_j·Σ_i (old − new)_+`, an arriving job pays `c_j·(1 − Σ_i x_ij)_+`,
/// departures are free.
pub fn audit(trace: &EventTrace, log: &[FractionalAssignment]) -> Result<f64, AdversaryError> {
    if log.len() != trace.len() {
        return Err(AdversaryError::LogGap { got: log.len(), want: trace.len() });
    }
    let mut costs: BTreeMap<JobId, f64> = BTreeMap::new();
    let empty = FractionalAssignment::new();
    let mut total = 0.0;
    for (t, ev) in trace.events.iter().enumerate() {
        let prev = if t == 0 { &empty } else { &log[t - 1] };
        let cur = &log[t];
        let arriving = match ev {
            Event::Arrive(job) => {
                costs.insert(job.id, job.reassignment_cost());
                total += job.reassignment_cost() * (1.0 - cur.row_sum(job.id)).max(0.0);
                Some(job.id)
            }
            Event::Depart(id) => {
                costs.remove(id);
                None
            }
        };
        for (&j, &c) in &costs {
            if Some(j) == arriving {
                continue;
            }
            let moved: f64 = prev.row(j).map(|(i, w)| (w - cur.get(j, i)).max(0.0)).sum();
            total += c * moved;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowerBound {
    /// `P^{L+1}(L+1)2^L/3`.
    pub value: f64,
    /// `Σ_j c_j = P^L(L+1)2^L`.
    pub total_cost: f64,
    /// `value / total_cost = P/3`.
    pub ratio: f64,
    /// Jobs after splitting into unit-cost pieces: `(L+1)(2P)^L`.
    pub unit_jobs: f64,
}

pub fn lower_bound_value(levels: u32, p: u64) -> Result<LowerBound, AdversaryError> {
    LbTree::new(levels, p)?;
    let (l, p) = (levels as f64, p as f64);
    let total_cost = p.powf(l) * (l + 1.0) * 2f64.powf(l);
    let value = p * total_cost / 3.0;
    Ok(LowerBound { value, total_cost, ratio: value / total_cost, unit_jobs: (l + 1.0) * (2.0 * p).powf(l) })
}

/// `f[v][k]`: copies of `j_v` on the `k`-th leaf below `v`; `f[0]` unused.
pub type Strategy = Vec<Vec<f64>>;

fn check_strategy(tree: &LbTree, f: &Strategy) -> Result<(), AdversaryError> {
    if f.len() != tree.num_vertices() + 1 {
        return Err(AdversaryError::Support { vertex: 0, reason: format!("{} maps for {} vertices", f.len().saturating_sub(1), tree.num_vertices()) });
    }
    for v in 1..=tree.num_vertices() {
        let support = tree.leaves_below(v).len();
        let fv = &f[v];
        if fv.len() != support {
            return Err(AdversaryError::Support { vertex: v, reason: format!("{} values for {support} leaves", fv.len()) });
        }
        if fv.iter().any(|&w| !(w >= 0.0)) {
            return Err(AdversaryError::Support { vertex: v, reason: "negative value".into() });
        }
        let cap = (1u64 << tree.level(v)) as f64;
        if fv.iter().sum::<f64>() > cap + 1e-9 {
            return Err(AdversaryError::Support { vertex: v, reason: format!("total exceeds {cap}") });
        }
    }
    Ok(())
}

/// Recourse `Σ_v P^{L−ℓ(v)+1}·c_{j_v}·(2^{ℓ(v)} − Σ_u f_v(u))` and the
/// largest per-leaf congestion `Σ_{v ancestor of u} f_v(u)`.
pub fn strategy_cost(tree: &LbTree, f: &Strategy) -> Result<(f64, f64), AdversaryError> {
    check_strategy(tree, f)?;
    let p = tree.p as f64;
    let mut recourse = 0.0;
    let mut congestion = vec![0.0; tree.num_leaves()];
    for v in 1..=tree.num_vertices() {
        let l = tree.level(v);
        let placed: f64 = f[v].iter().sum();
        recourse += p.powi((tree.levels - l + 1) as i32) * tree.cost(v) * ((1u64 << l) as f64 - placed);
        for (u, &w) in tree.leaves_below(v).zip(&f[v]) {
            congestion[u] += w;
        }
    }
    Ok((recourse, congestion.into_iter().fold(0.0, f64::max)))
}

/// Every vertex places all its copies, spread evenly.
pub fn full_strategy(tree: &LbTree) -> Strategy {
    let mut f = vec![Vec::new()];
    for v in 1..=tree.num_vertices() {
        let k = tree.leaves_below(v).len();
        f.push(vec![(1u64 << tree.level(v)) as f64 / k as f64; k]);
    }
    f
}
