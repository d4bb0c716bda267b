//! Replay driver: feeds a trace through a fractional algorithm and an
//! optional rounding, emitting one metrics row per event.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fractional::{ArrivalRecord, FractionalError, FractionalLb, GuessAndDouble};
use crate::genflow::{dummy_cost_formula, EdgeSpec, FlowNetwork, FlowWarning, OnlineFlow, SINK};
use crate::instance::{Event, EventTrace, FractionalAssignment, Job, JobId, JobSet};
use crate::oracle::compute_t_star;
use crate::rounding::loglog::LoglogRounding;
use crate::rounding::simple::{load_constant, offset_gap_mean, SimpleRounding};
use crate::rounding::two_eps::{TwoEpsRounding, C_TWO_EPS};
use crate::rounding::RoundingError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Fractional,
    Simple,
    TwoEps,
    Loglog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TStarMode {
    /// T* of the whole trace, fixed up front.
    Known,
    GuessDouble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub eps: f64,
    pub seed: u64,
    pub t_star_mode: TStarMode,
    /// Marking constant of the loglog rounding.
    pub mark_constant: f64,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, eps: f64) -> Self {
        RunConfig { algorithm, eps, seed: 0, t_star_mode: TStarMode::Known, mark_constant: crate::rounding::loglog::DEFAULT_MARK_CONSTANT }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.eps > 0.0) {
            return Err(HarnessError::Config(format!("ε = {} must be positive", self.eps)));
        }
        if self.algorithm == Algorithm::TwoEps && self.eps > 0.125 + 1e-15 {
            return Err(HarnessError::Config(format!("two-eps needs ε ≤ 1/8, got {}", self.eps)));
        }
        if self.eps >= 1.0 && self.t_star_mode == TStarMode::GuessDouble {
            return Err(HarnessError::Config("guess-and-double needs ε < 1".into()));
        }
        if self.algorithm != Algorithm::Fractional && self.t_star_mode == TStarMode::GuessDouble {
            return Err(HarnessError::Config("roundings run with a known T*".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("event {t}: departures are not supported by the upper-bound pipelines")]
    Departure { t: usize },
    #[error("event {t}: {source}")]
    Fractional { t: usize, source: FractionalError },
    #[error("event {t}: {source}")]
    Rounding { t: usize, source: RoundingError },
    #[error("T*: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: usize,
    pub job: JobId,
    pub makespan: f64,
    pub t_star: f64,
    pub ratio: f64,
    pub step_recourse: f64,
    pub cumulative_recourse: f64,
    pub amortized_recourse: f64,
    pub fractional_change: f64,
    pub cumulative_fractional: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recourse_types: Option<[u64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub capacity_change: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vertex_updates: Option<u64>,
    pub bound_violation: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub max_ratio: f64,
    pub final_amortized_recourse: f64,
    pub cumulative_recourse: f64,
    pub cumulative_fractional: f64,
    pub bound_violations: usize,
    pub path_bound_violations: usize,
    pub phase_starts: usize,
    pub recourse_types: [u64; 4],
}

enum Fractional {
    Known(FractionalLb),
    Guess(GuessAndDouble),
}

impl Fractional {
    fn arrive(&mut self, job: &Job) -> Result<ArrivalRecord, FractionalError> {
        match self {
            Fractional::Known(f) => f.arrive(job),
            Fractional::Guess(g) => g.arrive(job),
        }
    }

    fn x(&self) -> FractionalAssignment {
        match self {
            Fractional::Known(f) => f.x(),
            Fractional::Guess(g) => g.x(),
        }
    }
}

enum Rounder {
    None,
    Simple(SimpleRounding),
    TwoEps(TwoEpsRounding),
    Loglog(LoglogRounding),
}

/// Known-mode T*: the trace header's last value if present, else computed.
pub fn trace_t_star(trace: &EventTrace) -> Result<f64, HarnessError> {
    if let Some(v) = trace.known_t_star.as_ref().and_then(|v| v.last()) {
        return Ok(*v);
    }
    let jobs = trace.all_jobs();
    if jobs.is_empty() {
        return Ok(0.0);
    }
    Ok(compute_t_star(&jobs)?.value)
}

/// Replays `trace`; rows are emitted in event order.
pub fn run(cfg: &RunConfig, trace: &EventTrace) -> Result<(Vec<MetricsRow>, Summary), HarnessError> {
    cfg.validate()?;
    let mut summary = Summary::default();
    if trace.is_empty() {
        return Ok((Vec::new(), summary));
    }
    if let Some(t) = trace.events.iter().position(|e| matches!(e, Event::Depart(_))) {
        return Err(HarnessError::Departure { t });
    }
    let m = trace.num_machines();
    let n = trace.len();
    let t_star = trace_t_star(trace)?;
    let mut frac = match cfg.t_star_mode {
        TStarMode::Known => Fractional::Known(FractionalLb::new(m, cfg.eps, t_star, n)),
        TStarMode::GuessDouble => Fractional::Guess(GuessAndDouble::new(m, cfg.eps, n)),
    };
    let mut rounder = match cfg.algorithm {
        Algorithm::Fractional => Rounder::None,
        Algorithm::Simple => Rounder::Simple(SimpleRounding::new(t_star, cfg.eps, n, cfg.seed)),
        Algorithm::TwoEps => Rounder::TwoEps(TwoEpsRounding::new(m, cfg.eps)),
        Algorithm::Loglog => Rounder::Loglog(LoglogRounding::new((1.0 + cfg.eps) * t_star, n, cfg.seed).with_mark_constant(cfg.mark_constant)),
    };
    let mut jobs = JobSet::new(m);
    let mut rows = Vec::with_capacity(n);
    let (mut cum, mut cum_frac) = (0.0, 0.0);
    for (k, ev) in trace.events.iter().enumerate() {
        let t = k + 1;
        let Event::Arrive(job) = ev else { unreachable!() };
        jobs.insert(job.clone());
        let rec = frac.arrive(job).map_err(|source| HarnessError::Fractional { t, source })?;
        let rerr = |source| HarnessError::Rounding { t, source };
        let mut row = MetricsRow { t, job: job.id, fractional_change: rec.recourse, t_star: rec.t_star, ..MetricsRow::default() };
        match &mut rounder {
            Rounder::None => {
                row.makespan = rec.makespan;
                row.step_recourse = rec.recourse;
                row.bound_violation = rec.makespan > (1.0 + cfg.eps) * rec.t_star + 1e-6;
            }
            Rounder::Simple(r) => {
                let rep = r.step(&jobs, &frac.x(), Some(&rec.changed)).map_err(rerr)?;
                row.makespan = rep.makespan;
                row.step_recourse = rep.reassignments as f64;
                row.capacity_change = Some(rep.capacity_change);
                row.bound_violation = rep.makespan > load_constant(cfg.eps) * t_star + 1e-9;
            }
            Rounder::TwoEps(r) => {
                let rep = r.step(&jobs, &frac.x(), Some(&rec.changed)).map_err(rerr)?;
                row.makespan = rep.makespan;
                row.step_recourse = rep.reassignments as f64;
                row.vertex_updates = Some(rep.vertex_updates);
                row.bound_violation = rep.makespan > (2.0 + C_TWO_EPS * cfg.eps) * t_star + 1e-9;
            }
            Rounder::Loglog(r) => {
                let rep = r.step(&jobs, &frac.x()).map_err(rerr)?;
                row.makespan = rep.makespan;
                row.step_recourse = rep.total_recourse() as f64;
                row.recourse_types = Some(rep.recourse);
                row.bound_violation = r.check_decomposition(&jobs).is_err();
                for (a, b) in summary.recourse_types.iter_mut().zip(rep.recourse) {
                    *a += b;
                }
            }
        }
        if cfg.algorithm != Algorithm::Fractional {
            row.t_star = t_star;
        }
        cum += row.step_recourse;
        cum_frac += rec.recourse;
        row.cumulative_recourse = cum;
        row.amortized_recourse = cum / t as f64;
        row.cumulative_fractional = cum_frac;
        row.ratio = if row.t_star > 0.0 { row.makespan / row.t_star } else { 0.0 };
        summary.max_ratio = summary.max_ratio.max(row.ratio);
        summary.bound_violations += row.bound_violation as usize;
        rows.push(row);
    }
    summary.steps = rows.len();
    summary.cumulative_recourse = cum;
    summary.cumulative_fractional = cum_frac;
    summary.final_amortized_recourse = cum / rows.len() as f64;
    summary.path_bound_violations = match &rounder {
        Rounder::Simple(r) => r.matching().path_bound_violations().len(),
        Rounder::TwoEps(r) => r.matching().path_bound_violations().len(),
        _ => 0,
    };
    if let Fractional::Guess(g) = &frac {
        summary.phase_starts = g.events().len();
    }
    Ok((rows, summary))
}

/// Newline-delimited JSON, one row per line.
pub fn metrics_ndjson(rows: &[MetricsRow]) -> String {
    rows.iter().map(|r| serde_json::to_string(r).expect("row serializes") + "\n").collect()
}

/// The fractional schedule after every arrival in known-T* mode, with the
/// rows changed at each step.
pub fn fractional_sequence(trace: &EventTrace, eps: f64) -> Result<(f64, Vec<(FractionalAssignment, Vec<JobId>)>), HarnessError> {
    let t_star = trace_t_star(trace)?;
    let mut lb = FractionalLb::new(trace.num_machines(), eps, t_star, trace.len());
    let mut out = Vec::with_capacity(trace.len());
    for (k, ev) in trace.events.iter().enumerate() {
        let Event::Arrive(job) = ev else { return Err(HarnessError::Departure { t: k + 1 }) };
        let rec = lb.arrive(job).map_err(|source| HarnessError::Fractional { t: k + 1, source })?;
        out.push((lb.x(), rec.changed));
    }
    Ok((t_star, out))
}

// ---- b-matching ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RightVertex {
    pub id: String,
    pub b: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeftArrival {
    pub id: String,
    pub cost: f64,
    pub nbrs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmatchInstance {
    pub right: Vec<RightVertex>,
    pub left: Vec<LeftArrival>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmatchStep {
    pub left: String,
    /// Flow cost paid in this step.
    pub cost: f64,
    pub matching: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmatchReport {
    pub steps: Vec<BmatchStep>,
    pub total_cost: f64,
    pub sum_costs: f64,
    /// `((1+ε)/ε)·Σ c_u`.
    pub cost_bound: f64,
    /// Largest `(times matched) − ⌈(1+ε)b_v⌉` seen; ≤ 0 means capacity held.
    pub max_excess: i64,
    pub integral: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BmatchError {
    #[error("left vertex {0}: unknown neighbour {1}")]
    UnknownVertex(String, String),
    #[error("left vertex {left}: no valid b-matching (dummy flow {flow})")]
    PromiseViolated { left: String, flow: f64 },
    #[error(transparent)]
    Flow(#[from] crate::genflow::FlowError),
}

/// `⌈(1+ε)b⌉`, ignoring round-off below 1e-9.
pub fn bmatch_capacity(b: u32, eps: f64) -> u32 {
    ((1.0 + eps) * b as f64 - 1e-9).ceil().max(0.0) as u32
}

/// Online b-matching through the unit-gain flow network: left vertices are
/// sources with cost-`c_u` edges, right vertex `v` drains with capacity
/// `⌈(1+ε)b_v⌉`.
pub fn bmatch_run(inst: &BmatchInstance, eps: f64) -> Result<BmatchReport, BmatchError> {
    let max_cost = inst.left.iter().map(|u| u.cost).fold(1.0, f64::max);
    let nv = 1 + inst.right.len() + inst.left.len();
    let mut flow = OnlineFlow::new(FlowNetwork::new(dummy_cost_formula(inst.left.len(), max_cost, 1.0, nv)));
    let mut right = BTreeMap::new();
    let mut caps = Vec::new();
    for v in &inst.right {
        let id = flow.add_vertex(v.id.clone());
        let cap = bmatch_capacity(v.b, eps);
        let e = flow.add_edge(id, SINK, EdgeSpec::new(cap as f64, 0.0, 1.0))?;
        right.insert(v.id.clone(), (id, e));
        caps.push((e, cap));
    }
    let mut lefts: Vec<(String, Vec<(String, usize)>)> = Vec::new();
    let mut steps = Vec::new();
    let mut report = BmatchReport { steps: Vec::new(), total_cost: 0.0, sum_costs: 0.0, cost_bound: 0.0, max_excess: i64::MIN, integral: true };
    for u in &inst.left {
        let mut out = Vec::new();
        for name in &u.nbrs {
            let &(v, _) = right.get(name).ok_or_else(|| BmatchError::UnknownVertex(u.id.clone(), name.clone()))?;
            out.push((v, EdgeSpec::uncapacitated(u.cost, 1.0)));
        }
        let rec = flow.arrive_source(u.id.clone(), &out)?;
        if let Some(f) = rec.warnings.iter().find_map(|w| match w {
            FlowWarning::DummyUsed { flow } if *flow > 1e-7 => Some(*flow),
            _ => None,
        }) {
            return Err(BmatchError::PromiseViolated { left: u.id.clone(), flow: f });
        }
        let edges = flow.net().out_edges(rec.source)[1..].to_vec();
        lefts.push((u.id.clone(), u.nbrs.iter().cloned().zip(edges).collect()));
        report.sum_costs += u.cost;
        let x = flow.x();
        let mut matching = Vec::new();
        for (l, nbrs) in &lefts {
            for (r, e) in nbrs {
                let w = x[*e];
                if (w - w.round()).abs() > 1e-9 {
                    report.integral = false;
                }
                if w > 0.5 {
                    matching.push((l.clone(), r.clone()));
                }
            }
        }
        for &(e, cap) in &caps {
            report.max_excess = report.max_excess.max(x[e].round() as i64 - cap as i64);
        }
        steps.push(BmatchStep { left: u.id.clone(), cost: rec.cost, matching });
    }
    report.steps = steps;
    report.total_cost = flow.total_cost();
    report.cost_bound = (1.0 + eps) / eps * report.sum_costs;
    if report.max_excess == i64::MIN {
        report.max_excess = 0;
    }
    Ok(report)
}

/// Random instance with a planted b-matching: every left vertex has one
/// planted neighbour with spare capacity plus random extras.
pub fn gen_bmatch(num_right: usize, num_left: usize, seed: u64) -> BmatchInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let right: Vec<RightVertex> = (0..num_right).map(|k| RightVertex { id: format!("v{k}"), b: rng.gen_range(1..=3) }).collect();
    let mut load = vec![0u32; num_right];
    let mut left = Vec::new();
    for k in 0..num_left {
        let open: Vec<usize> = (0..num_right).filter(|&v| load[v] < right[v].b).collect();
        if open.is_empty() {
            break;
        }
        let planted = open[rng.gen_range(0..open.len())];
        load[planted] += 1;
        let mut nbrs = vec![planted];
        for v in 0..num_right {
            if v != planted && rng.gen_bool(0.3) {
                nbrs.push(v);
            }
        }
        nbrs.sort_unstable();
        left.push(LeftArrival { id: format!("u{k}"), cost: rng.gen_range(1..=5) as f64, nbrs: nbrs.into_iter().map(|v| format!("v{v}")).collect() });
    }
    BmatchInstance { right, left }
}

// ---- Monte-Carlo ----

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len().max(1) as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Estimate { mean, std: var.sqrt(), samples: xs.len() }
    }
}

/// `E|⌈f+ρ⌉ − ⌈f′+ρ⌉|` estimated over `replays` seeded batches of `draws`.
pub fn mc_claim2(f: f64, f2: f64, draws: usize, replays: usize, seed: u64) -> Estimate {
    let xs: Vec<f64> = (0..replays as u64).into_par_iter().map(|r| offset_gap_mean(f, f2, draws, seed.wrapping_add(r))).collect();
    Estimate::from_samples(&xs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoglogStats {
    pub n: usize,
    pub m: usize,
    pub t_star: f64,
    /// Cumulative recourse over `Σ|Δx|`, one value per master seed.
    pub c_r: Estimate,
    pub c_r_max: f64,
    pub makespan_ratio: Estimate,
    pub decomposition_violations: usize,
    pub low_mass_events: u64,
    pub recourse_types: [u64; 4],
    pub component_histogram: BTreeMap<usize, u64>,
}

/// Loglog replays of one trace under master seeds `0..seeds`.
pub fn mc_loglog(trace: &EventTrace, eps: f64, seeds: u64) -> Result<LoglogStats, HarnessError> {
    let (t_star, seq) = fractional_sequence(trace, eps)?;
    let n = trace.len();
    let all = trace.all_jobs();
    let per_seed: Vec<Result<_, HarnessError>> = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let mut r = LoglogRounding::new((1.0 + eps) * t_star, n, seed);
            let mut jobs = JobSet::new(trace.num_machines());
            let (mut rec, mut frac, mut worst, mut bad) = (0u64, 0.0, 0.0f64, 0usize);
            let mut types = [0u64; 4];
            for (k, (x, _)) in seq.iter().enumerate() {
                let id = match &trace.events[k] {
                    Event::Arrive(j) => j.id,
                    Event::Depart(_) => unreachable!(),
                };
                jobs.insert(all.get(id).unwrap().clone());
                let step = r.step(&jobs, x).map_err(|source| HarnessError::Rounding { t: k + 1, source })?;
                rec += step.total_recourse();
                frac += step.fractional_change;
                worst = worst.max(step.makespan / t_star);
                bad += r.check_decomposition(&jobs).is_err() as usize;
                for (a, b) in types.iter_mut().zip(step.recourse) {
                    *a += b;
                }
            }
            Ok((rec as f64 / frac.max(1e-12), worst, bad, r.low_mass_events(), types, r.component_histogram().clone()))
        })
        .collect();
    let mut c_r = Vec::new();
    let mut ratios = Vec::new();
    let mut stats = LoglogStats {
        n,
        m: trace.num_machines(),
        t_star,
        c_r: Estimate::from_samples(&[]),
        c_r_max: 0.0,
        makespan_ratio: Estimate::from_samples(&[]),
        decomposition_violations: 0,
        low_mass_events: 0,
        recourse_types: [0; 4],
        component_histogram: BTreeMap::new(),
    };
    for res in per_seed {
        let (cr, worst, bad, low, types, hist) = res?;
        c_r.push(cr);
        ratios.push(worst);
        stats.decomposition_violations += bad;
        stats.low_mass_events += low;
        for (a, b) in stats.recourse_types.iter_mut().zip(types) {
            *a += b;
        }
        for (k, c) in hist {
            *stats.component_histogram.entry(k).or_default() += c;
        }
    }
    stats.c_r_max = c_r.iter().copied().fold(0.0, f64::max);
    stats.c_r = Estimate::from_samples(&c_r);
    stats.makespan_ratio = Estimate::from_samples(&ratios);
    Ok(stats)
}
