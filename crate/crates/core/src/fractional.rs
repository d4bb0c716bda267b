//! Fractional load balancing through the flow reduction: machines drain to
//! the sink with capacity (1+ε)T̂, and job j reaches machine i through an
//! uncapacitated edge of cost 1 and gain p_ij.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::genflow::{dummy_cost_formula, EdgeId, EdgeSpec, FlowError, FlowNetwork, FlowWarning, Mode, OnlineFlow, Solver, VertexId, SINK};
use crate::instance::{Assignment, FractionalAssignment, Job, JobId, JobSet, MachineId};
use crate::oracle::{compute_t_star, OracleError};
use crate::rounding::two_eps;

/// Flow on dummy edges above this is reported.
const DUMMY_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FractionalError {
    #[error("job {job} has no machine with p ≤ {t_hat}")]
    NoAdmissibleEdge { job: JobId, t_hat: f64 },
    #[error("job {0} arrived twice")]
    DuplicateJob(JobId),
    #[error("dummy edges carry {flow} after job {job}: infeasible at the current estimate")]
    DummyUsed { job: JobId, flow: f64 },
    #[error("freezing failed: {0}")]
    Freeze(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalRecord {
    pub job: JobId,
    /// T* of the arrived jobs (guess-and-double) or the fixed value in use.
    pub t_star: f64,
    pub makespan: f64,
    /// `Σ_ij |x^(t) − x^(t−1)|`, the new job's row included.
    pub recourse: f64,
    pub flow_cost: f64,
    /// Jobs whose row changed, the new job included.
    pub changed: Vec<JobId>,
}

/// Known-estimate mode: one reduction network at a fixed T̂.
#[derive(Clone, Debug)]
pub struct FractionalLb {
    eps: f64,
    t_hat: f64,
    num_machines: usize,
    n_max: usize,
    /// Smallest admissible processing time seen; reverse arcs have gain 1/p.
    p_min: f64,
    flow: OnlineFlow,
    jobs: JobSet,
    /// Source vertex and (machine, edge) list of every job.
    sources: BTreeMap<JobId, (VertexId, Vec<(MachineId, EdgeId)>)>,
}

impl FractionalLb {
    /// `n_max` only feeds the dummy-cost formula.
    pub fn new(num_machines: usize, eps: f64, t_hat: f64, n_max: usize) -> Self {
        assert!(eps > 0.0 && t_hat > 0.0);
        let b = Self::dummy_cost(n_max, num_machines, t_hat, 1.0);
        let mut flow = OnlineFlow::new(FlowNetwork::new(b));
        for i in 0..num_machines {
            let v = flow.add_vertex(format!("m{i}"));
            flow.add_edge(v, SINK, EdgeSpec::new((1.0 + eps) * t_hat, 0.0, 1.0)).expect("machine edge");
        }
        FractionalLb { eps, t_hat, num_machines, n_max, p_min: 1.0, flow, jobs: JobSet::new(num_machines), sources: BTreeMap::new() }
    }

    /// Residual gains lie in `[p_min, T̂]` forward and `[1/T̂, 1/p_min]` backward.
    fn dummy_cost(n_max: usize, num_machines: usize, t_hat: f64, p_min: f64) -> f64 {
        dummy_cost_formula(n_max, 1.0, t_hat.max(1.0) / p_min.min(1.0), n_max + num_machines + 1)
    }

    pub fn with_flow_mode(mut self, mode: Mode, solver: Solver) -> Self {
        self.flow.mode = mode;
        self.flow.solver = solver;
        self
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn t_hat(&self) -> f64 {
        self.t_hat
    }

    pub fn jobs(&self) -> &JobSet {
        &self.jobs
    }

    pub fn flow(&self) -> &OnlineFlow {
        &self.flow
    }

    fn machine_vertex(i: MachineId) -> VertexId {
        i.0 + 1
    }

    /// Routes one unit for `job`; edges with p > T̂ are left out.
    pub fn arrive(&mut self, job: &Job) -> Result<ArrivalRecord, FractionalError> {
        if self.sources.contains_key(&job.id) {
            return Err(FractionalError::DuplicateJob(job.id));
        }
        let admissible: Vec<(MachineId, f64)> = job.procs.iter().copied().filter(|&(_, p)| p <= self.t_hat * (1.0 + 1e-12)).collect();
        if admissible.is_empty() {
            return Err(FractionalError::NoAdmissibleEdge { job: job.id, t_hat: self.t_hat });
        }
        let p_min = admissible.iter().map(|&(_, p)| p).fold(self.p_min, f64::min);
        if p_min < self.p_min {
            self.p_min = p_min;
            self.flow.raise_dummy_cost(Self::dummy_cost(self.n_max, self.num_machines, self.t_hat, p_min));
        }
        let out: Vec<(VertexId, EdgeSpec)> = admissible.iter().map(|&(i, p)| (Self::machine_vertex(i), EdgeSpec::uncapacitated(1.0, p))).collect();
        let before = self.flow.x().to_vec();
        let rec = self.flow.arrive_source(format!("j{}", job.id), &out)?;
        let edges = self.flow.net().out_edges(rec.source);
        // Edge 0 of a source is its dummy edge.
        let pairs: Vec<(MachineId, EdgeId)> = admissible.iter().map(|&(i, _)| i).zip(edges[1..].iter().copied()).collect();
        self.sources.insert(job.id, (rec.source, pairs));
        self.jobs.insert(job.clone());
        let x = self.flow.x();
        let mut recourse = 0.0;
        let mut changed = Vec::new();
        for (&j, (_, pairs)) in &self.sources {
            let d: f64 = pairs.iter().map(|&(_, e)| (x[e] - before.get(e).copied().unwrap_or(0.0)).abs()).sum();
            if d > 0.0 {
                recourse += d;
                changed.push(j);
            }
        }
        let dummy = rec.warnings.iter().find_map(|w| match w {
            FlowWarning::DummyUsed { flow } if *flow > DUMMY_TOL => Some(*flow),
            _ => None,
        });
        if let Some(flow) = dummy {
            return Err(FractionalError::DummyUsed { job: job.id, flow });
        }
        Ok(ArrivalRecord { job: job.id, t_star: self.t_hat, makespan: self.makespan(), recourse, flow_cost: rec.cost, changed })
    }

    pub fn row(&self, job: JobId) -> Vec<(MachineId, f64)> {
        let x = self.flow.x();
        self.sources.get(&job).map(|(_, pairs)| pairs.iter().map(|&(i, e)| (i, x[e])).filter(|&(_, w)| w > 0.0).collect()).unwrap_or_default()
    }

    pub fn x(&self) -> FractionalAssignment {
        let mut out = FractionalAssignment::new();
        for &j in self.sources.keys() {
            out.touch(j);
            for (i, w) in self.row(j) {
                out.set(j, i, w);
            }
        }
        out
    }

    /// Per-machine load read from the machine→sink edges.
    pub fn loads(&self) -> Vec<f64> {
        let x = self.flow.x();
        (0..self.num_machines).map(|i| x[self.flow.net().out_edges(i + 1)[1]]).collect()
    }

    pub fn makespan(&self) -> f64 {
        self.loads().into_iter().fold(0.0, f64::max)
    }
}

/// Emitted whenever the estimate is revised.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseStart {
    /// Index of the arrival that triggered it (0-based).
    pub t: usize,
    pub stage: usize,
    pub phase: usize,
    pub stage_changed: bool,
    pub t_star: f64,
    pub estimate: f64,
    pub reintroduced: usize,
    pub newly_frozen: usize,
    pub frozen_makespan: f64,
    /// Frozen load exceeded 8εT*.
    pub frozen_flag: bool,
}

/// Unknown-T* wrapper: stages at factor 1/ε, phases at factor 1+ε.
#[derive(Clone, Debug)]
pub struct GuessAndDouble {
    eps: f64,
    num_machines: usize,
    n_max: usize,
    all: JobSet,
    stage_of: BTreeMap<JobId, usize>,
    frozen: Assignment,
    frozen_jobs: JobSet,
    inner: Option<FractionalLb>,
    stage: usize,
    phase: usize,
    stage_base: f64,
    phase_base: f64,
    t: usize,
    events: Vec<PhaseStart>,
    reintroductions: BTreeMap<JobId, usize>,
}

impl GuessAndDouble {
    pub fn new(num_machines: usize, eps: f64, n_max: usize) -> Self {
        assert!(eps > 0.0 && eps < 1.0);
        GuessAndDouble {
            eps,
            num_machines,
            n_max,
            all: JobSet::new(num_machines),
            stage_of: BTreeMap::new(),
            frozen: Assignment::new(),
            frozen_jobs: JobSet::new(num_machines),
            inner: None,
            stage: 0,
            phase: 0,
            stage_base: 0.0,
            phase_base: 0.0,
            t: 0,
            events: Vec::new(),
            reintroductions: BTreeMap::new(),
        }
    }

    pub fn events(&self) -> &[PhaseStart] {
        &self.events
    }

    pub fn reintroductions(&self) -> &BTreeMap<JobId, usize> {
        &self.reintroductions
    }

    pub fn frozen(&self) -> &Assignment {
        &self.frozen
    }

    pub fn jobs(&self) -> &JobSet {
        &self.all
    }

    /// `2⌈log_{1+ε}(1/ε)⌉`.
    pub fn reintroduction_bound(&self) -> usize {
        2 * ((1.0 / self.eps).ln() / (1.0 + self.eps).ln()).ceil() as usize
    }

    pub fn arrive(&mut self, job: &Job) -> Result<ArrivalRecord, FractionalError> {
        if self.all.contains(job.id) {
            return Err(FractionalError::DuplicateJob(job.id));
        }
        let t = self.t;
        self.t += 1;
        self.all.insert(job.clone());
        let t_star = compute_t_star(&self.all)?.value;
        let mut recourse = 0.0;
        let mut changed = Vec::new();
        let slack = 1.0 - 1e-9;
        let first = self.inner.is_none();
        let new_stage = first || t_star >= self.stage_base / self.eps * slack;
        let new_phase = new_stage || t_star >= self.phase_base * (1.0 + self.eps) * slack;
        if new_phase {
            let mut newly_frozen = 0;
            if new_stage {
                if !first {
                    self.stage += 1;
                }
                self.stage_base = t_star;
                newly_frozen = self.freeze()?;
            }
            if !first {
                self.phase += 1;
            }
            self.phase_base = t_star;
            let (r, ch, reintroduced) = self.restart((1.0 + self.eps) * t_star)?;
            recourse += r;
            changed = ch;
            let frozen_makespan = self.frozen.makespan(&self.frozen_jobs);
            self.events.push(PhaseStart {
                t,
                stage: self.stage,
                phase: self.phase,
                stage_changed: new_stage && !first,
                t_star,
                estimate: (1.0 + self.eps) * t_star,
                reintroduced,
                newly_frozen,
                frozen_makespan,
                frozen_flag: frozen_makespan > 8.0 * self.eps * t_star + 1e-9,
            });
        }
        self.stage_of.insert(job.id, self.stage);
        let rec = self.inner.as_mut().unwrap().arrive(job)?;
        recourse += rec.recourse;
        for j in rec.changed {
            if !changed.contains(&j) {
                changed.push(j);
            }
        }
        changed.sort();
        Ok(ArrivalRecord { job: job.id, t_star, makespan: self.makespan(), recourse, flow_cost: rec.flow_cost, changed })
    }

    /// Freezes every unfrozen job of stages ≤ current − 2 with an offline rounding.
    fn freeze(&mut self) -> Result<usize, FractionalError> {
        if self.stage < 2 {
            return Ok(0);
        }
        let cutoff = self.stage - 2;
        let batch: Vec<JobId> = self.stage_of.iter().filter(|&(j, &g)| g <= cutoff && !self.frozen_jobs.contains(*j)).map(|(&j, _)| j).collect();
        if batch.is_empty() {
            return Ok(0);
        }
        let jobs = self.all.subset(batch.iter().copied());
        let lp = compute_t_star(&jobs)?;
        let sigma = two_eps::offline_round(&jobs, &lp.x, 1.0 / 8.0).map_err(|e| FractionalError::Freeze(e.to_string()))?;
        for (j, i) in sigma.iter() {
            self.frozen.assign(j, i);
        }
        for job in jobs.iter() {
            self.frozen_jobs.insert(job.clone());
        }
        Ok(batch.len())
    }

    /// Rebuilds the network at `estimate` and replays every unfrozen job.
    fn restart(&mut self, estimate: f64) -> Result<(f64, Vec<JobId>, usize), FractionalError> {
        let old = self.inner.take();
        let mut fresh = FractionalLb::new(self.num_machines, self.eps, estimate, self.n_max);
        let mut recourse = 0.0;
        let mut changed = Vec::new();
        let mut reintroduced = 0;
        let ids: Vec<JobId> = self.stage_of.keys().copied().filter(|j| !self.frozen_jobs.contains(*j)).collect();
        for &j in &ids {
            fresh.arrive(self.all.get(j).unwrap())?;
        }
        if let Some(old) = &old {
            for j in old.jobs().ids() {
                let before = old.row(j);
                let after: Vec<(MachineId, f64)> = if self.frozen_jobs.contains(j) {
                    vec![(self.frozen.get(j).unwrap(), 1.0)]
                } else {
                    fresh.row(j)
                };
                let d = row_distance(&before, &after);
                if d > 0.0 {
                    recourse += d;
                    changed.push(j);
                }
            }
        }
        for &j in &ids {
            reintroduced += 1;
            *self.reintroductions.entry(j).or_default() += 1;
        }
        self.inner = Some(fresh);
        Ok((recourse, changed, reintroduced))
    }

    /// Frozen jobs integrally, the rest from the current network.
    pub fn x(&self) -> FractionalAssignment {
        let mut x = self.inner.as_ref().map(|f| f.x()).unwrap_or_default();
        for (j, i) in self.frozen.iter() {
            x.set(j, i, 1.0);
        }
        x
    }

    pub fn makespan(&self) -> f64 {
        let mut loads = self.frozen.loads(&self.frozen_jobs);
        if let Some(inner) = &self.inner {
            for (l, v) in loads.iter_mut().zip(inner.loads()) {
                *l += v;
            }
        }
        loads.into_iter().fold(0.0, f64::max)
    }
}

fn row_distance(a: &[(MachineId, f64)], b: &[(MachineId, f64)]) -> f64 {
    let mut m: BTreeMap<MachineId, f64> = BTreeMap::new();
    for &(i, w) in a {
        *m.entry(i).or_default() += w;
    }
    for &(i, w) in b {
        *m.entry(i).or_default() -= w;
    }
    m.values().map(|v| v.abs()).sum()
}
