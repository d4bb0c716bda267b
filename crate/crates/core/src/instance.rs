//! Jobs, event traces, schedules and random instance generators.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Absolute tolerance used for all float comparisons unless stated otherwise.
pub const FLOAT_TOL: f64 = 1e-9;

pub type JobId = u64;

/// Index of a machine in the trace's machine list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MachineId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub id: JobId,
    /// Admissible machines with their processing times, sorted by machine.
    pub procs: Vec<(MachineId, f64)>,
    /// Per-unit reassignment cost; `None` means unit cost.
    pub cost: Option<f64>,
}

impl Job {
    pub fn new(id: JobId, mut procs: Vec<(MachineId, f64)>) -> Result<Self, TraceError> {
        procs.sort_by_key(|&(i, _)| i);
        let job = Job { id, procs, cost: None };
        job.check()?;
        Ok(job)
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = Some(cost);
        self
    }

    fn check(&self) -> Result<(), TraceError> {
        let invalid = |reason: String| TraceError::Validation { line: None, job: self.id, reason };
        if self.procs.is_empty() {
            return Err(invalid("no admissible machine".into()));
        }
        for w in self.procs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid(format!("machine {} listed twice", w[0].0 .0)));
            }
        }
        for &(i, p) in &self.procs {
            if !(p > 0.0) || !p.is_finite() {
                return Err(invalid(format!("processing time {p} on machine {} is not positive", i.0)));
            }
        }
        if let Some(c) = self.cost {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(invalid(format!("reassignment cost {c} is not a non-negative number")));
            }
        }
        Ok(())
    }

    pub fn p(&self, machine: MachineId) -> Option<f64> {
        self.procs
            .binary_search_by_key(&machine, |&(i, _)| i)
            .ok()
            .map(|k| self.procs[k].1)
    }

    pub fn machines(&self) -> impl Iterator<Item = MachineId> + '_ {
        self.procs.iter().map(|&(i, _)| i)
    }

    pub fn reassignment_cost(&self) -> f64 {
        self.cost.unwrap_or(1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Arrive(Job),
    Depart(JobId),
}

impl Event {
    pub fn job_id(&self) -> JobId {
        match self {
            Event::Arrive(j) => j.id,
            Event::Depart(id) => *id,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("job {job}{}: {reason}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation { line: Option<usize>, job: JobId, reason: String },
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EventTrace {
    pub machines: Vec<String>,
    pub events: Vec<Event>,
    /// Optional known optimal fractional makespan after each event.
    pub known_t_star: Option<Vec<f64>>,
}

impl EventTrace {
    pub fn new(machines: Vec<String>, events: Vec<Event>) -> Result<Self, TraceError> {
        let trace = EventTrace { machines, events, known_t_star: None };
        trace.validate()?;
        Ok(trace)
    }

    pub fn num_machines(&self) -> usize {
        self.machines.len()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn machine_ids(&self) -> impl Iterator<Item = MachineId> {
        (0..self.machines.len()).map(MachineId)
    }

    pub fn is_arrivals_only(&self) -> bool {
        self.events.iter().all(|e| matches!(e, Event::Arrive(_)))
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let mut seen = BTreeSet::new();
        let mut active = BTreeSet::new();
        let m = self.machines.len();
        let distinct: BTreeSet<&String> = self.machines.iter().collect();
        if distinct.len() != m {
            return Err(TraceError::Parse { line: 1, message: "duplicate machine id in header".into() });
        }
        for ev in &self.events {
            match ev {
                Event::Arrive(job) => {
                    job.check()?;
                    if let Some(&(i, _)) = job.procs.iter().find(|(i, _)| i.0 >= m) {
                        return Err(TraceError::Validation {
                            line: None,
                            job: job.id,
                            reason: format!("unknown machine index {}", i.0),
                        });
                    }
                    if !seen.insert(job.id) {
                        return Err(TraceError::Validation { line: None, job: job.id, reason: "duplicate arrival".into() });
                    }
                    active.insert(job.id);
                }
                Event::Depart(id) => {
                    if !active.remove(id) {
                        return Err(TraceError::Validation {
                            line: None,
                            job: *id,
                            reason: "departure of a job that is not active".into(),
                        });
                    }
                }
            }
        }
        if let Some(ts) = &self.known_t_star {
            if ts.len() != self.events.len() {
                return Err(TraceError::Parse {
                    line: 1,
                    message: format!("t_star metadata has {} entries for {} events", ts.len(), self.events.len()),
                });
            }
        }
        Ok(())
    }

    /// The first `t` events as a trace of their own.
    pub fn prefix(&self, t: usize) -> EventTrace {
        EventTrace {
            machines: self.machines.clone(),
            events: self.events[..t].to_vec(),
            known_t_star: self.known_t_star.as_ref().map(|v| v[..t].to_vec()),
        }
    }

    /// Every job that arrives somewhere in the trace.
    pub fn all_jobs(&self) -> JobSet {
        let mut set = JobSet::new(self.machines.len());
        for ev in &self.events {
            if let Event::Arrive(j) = ev {
                set.insert(j.clone());
            }
        }
        set
    }

    /// Jobs active after the first `t` events.
    pub fn active_after(&self, t: usize) -> JobSet {
        let mut set = JobSet::new(self.machines.len());
        for ev in &self.events[..t] {
            match ev {
                Event::Arrive(j) => set.insert(j.clone()),
                Event::Depart(id) => {
                    set.remove(*id);
                }
            }
        }
        set
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        let header = Header { machines: self.machines.clone(), t_star: self.known_t_star.clone() };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for ev in &self.events {
            let line = match ev {
                Event::Arrive(job) => {
                    let procs: Vec<(&str, f64)> =
                        job.procs.iter().map(|&(i, p)| (self.machines[i.0].as_str(), p)).collect();
                    serde_json::to_string(&RecordOut::Arrive { job: job.id, procs: OrderedProcs(&procs), cost: job.cost })
                }
                Event::Depart(id) => serde_json::to_string(&RecordOut::Depart { job: *id }),
            };
            out.push_str(&line.expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    machines: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_star: Option<Vec<f64>>,
}

struct OrderedProcs<'a>(&'a [(&'a str, f64)]);

impl Serialize for OrderedProcs<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum RecordOut<'a> {
    Arrive {
        job: JobId,
        procs: OrderedProcs<'a>,
        #[serde(skip_serializing_if = "Option::is_none")]
        cost: Option<f64>,
    },
    Depart {
        job: JobId,
    },
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum RecordIn {
    Arrive {
        job: JobId,
        procs: BTreeMap<String, f64>,
        #[serde(default)]
        cost: Option<f64>,
    },
    Depart {
        job: JobId,
    },
}

/// Parses the newline-delimited trace format. The header line is optional;
/// without it machines are numbered in order of first appearance.
pub fn parse_trace(text: &str) -> Result<EventTrace, TraceError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim())).filter(|(_, l)| !l.is_empty()).peekable();

    let mut machines: Vec<String> = Vec::new();
    let mut t_star = None;
    let mut fixed_machines = false;
    if let Some(&(line, first)) = lines.peek() {
        let value: serde_json::Value =
            serde_json::from_str(first).map_err(|e| TraceError::Parse { line, message: e.to_string() })?;
        if value.get("op").is_none() {
            let header: Header =
                serde_json::from_value(value).map_err(|e| TraceError::Parse { line, message: e.to_string() })?;
            machines = header.machines;
            t_star = header.t_star;
            fixed_machines = true;
            lines.next();
        }
    }
    let mut index: HashMap<String, usize> = machines.iter().enumerate().map(|(k, m)| (m.clone(), k)).collect();
    if index.len() != machines.len() {
        return Err(TraceError::Parse { line: 1, message: "duplicate machine id in header".into() });
    }

    let mut events = Vec::new();
    let mut seen = BTreeSet::new();
    let mut active = BTreeSet::new();
    for (line, text) in lines {
        let rec: RecordIn =
            serde_json::from_str(text).map_err(|e| TraceError::Parse { line, message: e.to_string() })?;
        match rec {
            RecordIn::Arrive { job, procs, cost } => {
                let mut ps = Vec::with_capacity(procs.len());
                for (name, p) in procs {
                    let k = match index.get(&name) {
                        Some(&k) => k,
                        None if !fixed_machines => {
                            machines.push(name.clone());
                            index.insert(name, machines.len() - 1);
                            machines.len() - 1
                        }
                        None => {
                            return Err(TraceError::Validation {
                                line: Some(line),
                                job,
                                reason: format!("machine {name:?} is not in the header"),
                            })
                        }
                    };
                    ps.push((MachineId(k), p));
                }
                ps.sort_by_key(|&(i, _)| i);
                let j = Job { id: job, procs: ps, cost };
                j.check().map_err(|e| with_line(e, line))?;
                if !seen.insert(job) {
                    return Err(TraceError::Validation { line: Some(line), job, reason: "duplicate arrival".into() });
                }
                active.insert(job);
                events.push(Event::Arrive(j));
            }
            RecordIn::Depart { job } => {
                if !active.remove(&job) {
                    return Err(TraceError::Validation {
                        line: Some(line),
                        job,
                        reason: "departure of a job that is not active".into(),
                    });
                }
                events.push(Event::Depart(job));
            }
        }
    }
    let trace = EventTrace { machines, events, known_t_star: t_star };
    trace.validate()?;
    Ok(trace)
}

fn with_line(e: TraceError, line: usize) -> TraceError {
    match e {
        TraceError::Validation { job, reason, .. } => TraceError::Validation { line: Some(line), job, reason },
        other => other,
    }
}

/// A set of jobs keyed by id, together with the machine count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JobSet {
    pub num_machines: usize,
    jobs: BTreeMap<JobId, Job>,
}

impl JobSet {
    pub fn new(num_machines: usize) -> Self {
        JobSet { num_machines, jobs: BTreeMap::new() }
    }

    pub fn from_jobs(num_machines: usize, jobs: impl IntoIterator<Item = Job>) -> Self {
        let mut set = JobSet::new(num_machines);
        for j in jobs {
            set.insert(j);
        }
        set
    }

    pub fn insert(&mut self, job: Job) {
        self.jobs.insert(job.id, job);
    }

    pub fn remove(&mut self, id: JobId) -> Option<Job> {
        self.jobs.remove(&id)
    }

    pub fn get(&self, id: JobId) -> Option<&Job> {
        self.jobs.get(&id)
    }

    pub fn contains(&self, id: JobId) -> bool {
        self.jobs.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Job> {
        self.jobs.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = JobId> + '_ {
        self.jobs.keys().copied()
    }

    /// Restricts to the given ids (missing ids are ignored).
    pub fn subset(&self, ids: impl IntoIterator<Item = JobId>) -> JobSet {
        let mut out = JobSet::new(self.num_machines);
        for id in ids {
            if let Some(j) = self.jobs.get(&id) {
                out.insert(j.clone());
            }
        }
        out
    }

    pub fn max_p(&self) -> f64 {
        self.iter().flat_map(|j| j.procs.iter().map(|&(_, p)| p)).fold(0.0, f64::max)
    }
}

/// Integral schedule σ.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    map: BTreeMap<JobId, MachineId>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, job: JobId, machine: MachineId) {
        self.map.insert(job, machine);
    }

    pub fn unassign(&mut self, job: JobId) -> Option<MachineId> {
        self.map.remove(&job)
    }

    pub fn get(&self, job: JobId) -> Option<MachineId> {
        self.map.get(&job).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (JobId, MachineId)> + '_ {
        self.map.iter().map(|(&j, &i)| (j, i))
    }

    pub fn loads(&self, jobs: &JobSet) -> Vec<f64> {
        let mut loads = vec![0.0; jobs.num_machines];
        for (j, i) in self.iter() {
            let job = jobs.get(j).expect("assigned job is known");
            loads[i.0] += job.p(i).expect("assignment uses an admissible machine");
        }
        loads
    }

    pub fn makespan(&self, jobs: &JobSet) -> f64 {
        self.loads(jobs).into_iter().fold(0.0, f64::max)
    }

    /// Jobs assigned in both schedules whose machine differs.
    pub fn changed_jobs(&self, other: &Assignment) -> Vec<JobId> {
        self.iter().filter(|&(j, i)| other.get(j).is_some_and(|i2| i2 != i)).map(|(j, _)| j).collect()
    }

    /// Checks that every job in `jobs` is assigned to an admissible machine.
    pub fn is_feasible_for(&self, jobs: &JobSet) -> bool {
        jobs.iter().all(|j| self.get(j.id).is_some_and(|i| j.p(i).is_some()))
    }

    pub fn to_fractional(&self) -> FractionalAssignment {
        let mut x = FractionalAssignment::new();
        for (j, i) in self.iter() {
            x.set(j, i, 1.0);
        }
        x
    }
}

/// Fractional schedule x: per job, weights over machines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FractionalAssignment {
    rows: BTreeMap<JobId, BTreeMap<MachineId, f64>>,
}

impl FractionalAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, job: JobId, machine: MachineId) -> f64 {
        self.rows.get(&job).and_then(|r| r.get(&machine)).copied().unwrap_or(0.0)
    }

    /// Sets a weight; zero weights are dropped from storage.
    pub fn set(&mut self, job: JobId, machine: MachineId, w: f64) {
        let row = self.rows.entry(job).or_default();
        if w == 0.0 {
            row.remove(&machine);
        } else {
            row.insert(machine, w);
        }
    }

    /// Registers a job with no weight yet.
    pub fn touch(&mut self, job: JobId) {
        self.rows.entry(job).or_default();
    }

    pub fn remove_job(&mut self, job: JobId) {
        self.rows.remove(&job);
    }

    pub fn row(&self, job: JobId) -> impl Iterator<Item = (MachineId, f64)> + '_ {
        self.rows.get(&job).into_iter().flat_map(|r| r.iter().map(|(&i, &w)| (i, w)))
    }

    pub fn jobs(&self) -> impl Iterator<Item = JobId> + '_ {
        self.rows.keys().copied()
    }

    pub fn contains_job(&self, job: JobId) -> bool {
        self.rows.contains_key(&job)
    }

    pub fn num_jobs(&self) -> usize {
        self.rows.len()
    }

    pub fn row_sum(&self, job: JobId) -> f64 {
        self.row(job).map(|(_, w)| w).sum()
    }

    pub fn loads(&self, jobs: &JobSet) -> Vec<f64> {
        let mut loads = vec![0.0; jobs.num_machines];
        for (&j, row) in &self.rows {
            let job = jobs.get(j).expect("job in schedule is known");
            for (&i, &w) in row {
                loads[i.0] += w * job.p(i).expect("weight on an admissible machine");
            }
        }
        loads
    }

    pub fn makespan(&self, jobs: &JobSet) -> f64 {
        self.loads(jobs).into_iter().fold(0.0, f64::max)
    }

    /// Checks weights lie in `[0, 1]`, sit on admissible edges and sum to one per job.
    pub fn validate(&self, jobs: &JobSet, tol: f64) -> Result<(), String> {
        for (&j, row) in &self.rows {
            let job = jobs.get(j).ok_or_else(|| format!("job {j} is not in the job set"))?;
            let mut sum = 0.0;
            for (&i, &w) in row {
                if job.p(i).is_none() {
                    return Err(format!("job {j} has weight on forbidden machine {}", i.0));
                }
                if w < -tol || w > 1.0 + tol {
                    return Err(format!("job {j} has weight {w} on machine {}", i.0));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > tol {
                return Err(format!("weights of job {j} sum to {sum}"));
            }
        }
        Ok(())
    }

    /// Total L1 movement over all jobs present in either schedule.
    pub fn l1_distance(&self, other: &FractionalAssignment) -> f64 {
        let jobs: BTreeSet<JobId> = self.jobs().chain(other.jobs()).collect();
        jobs.into_iter().map(|j| self.job_l1_distance(other, j)).sum()
    }

    pub fn job_l1_distance(&self, other: &FractionalAssignment, job: JobId) -> f64 {
        let mut d = 0.0;
        let machines: BTreeSet<MachineId> = self.row(job).chain(other.row(job)).map(|(i, _)| i).collect();
        for i in machines {
            d += (self.get(job, i) - other.get(job, i)).abs();
        }
        d
    }

    /// Whether every weight is within `tol` of 0 or 1.
    pub fn is_integral(&self, tol: f64) -> bool {
        self.rows.values().flat_map(|r| r.values()).all(|&w| w <= tol || w >= 1.0 - tol)
    }

    /// Rounds an integral schedule to σ, taking the heaviest machine per job.
    pub fn to_assignment(&self) -> Assignment {
        let mut sigma = Assignment::new();
        for (&j, row) in &self.rows {
            if let Some((&i, _)) = row.iter().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0))) {
                sigma.assign(j, i);
            }
        }
        sigma
    }
}

fn machine_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("m{i}")).collect()
}

fn random_subset(rng: &mut ChaCha8Rng, m: usize) -> Vec<usize> {
    loop {
        let picked: Vec<usize> = (0..m).filter(|_| rng.gen::<bool>()).collect();
        if !picked.is_empty() {
            return picked;
        }
    }
}

fn sample_p(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Arrivals-only trace; each job gets a uniform nonempty machine subset and
/// independent processing times drawn from `p_range`.
pub fn gen_random_unrelated(n: usize, m: usize, seed: u64, p_range: (f64, f64)) -> EventTrace {
    assert!(n >= 1 && m >= 1, "need at least one job and one machine");
    assert!(p_range.0 > 0.0 && p_range.1 >= p_range.0, "processing-time range must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = (0..n as JobId)
        .map(|id| {
            let procs = random_subset(&mut rng, m).into_iter().map(|i| (MachineId(i), sample_p(&mut rng, p_range))).collect();
            Event::Arrive(Job { id, procs, cost: None })
        })
        .collect();
    EventTrace { machines: machine_names(m), events, known_t_star: None }
}

/// Restricted assignment: like [`gen_random_unrelated`] with one processing
/// time per job, drawn from `[1, 10]`.
pub fn gen_restricted(n: usize, m: usize, seed: u64) -> EventTrace {
    assert!(n >= 1 && m >= 1, "need at least one job and one machine");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = (0..n as JobId)
        .map(|id| {
            let subset = random_subset(&mut rng, m);
            let p = sample_p(&mut rng, (1.0, 10.0));
            Event::Arrive(Job { id, procs: subset.into_iter().map(|i| (MachineId(i), p)).collect(), cost: None })
        })
        .collect();
    EventTrace { machines: machine_names(m), events, known_t_star: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_trace_without_header() {
        let t = parse_trace("{\"op\":\"arrive\",\"job\":1,\"procs\":{\"m1\":1.0}}\n{\"op\":\"depart\",\"job\":1}\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.machines, vec!["m1".to_string()]);
    }

    #[test]
    fn depart_before_arrival_is_rejected() {
        let err = parse_trace("{\"machines\":[\"m0\"]}\n{\"op\":\"depart\",\"job\":7}\n").unwrap_err();
        assert!(matches!(err, TraceError::Validation { job: 7, line: Some(2), .. }), "{err:?}");
    }

    #[test]
    fn zero_processing_time_is_rejected() {
        let err = parse_trace("{\"machines\":[\"m0\"]}\n{\"op\":\"arrive\",\"job\":3,\"procs\":{\"m0\":0.0}}\n").unwrap_err();
        assert!(matches!(err, TraceError::Validation { job: 3, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_arrival_is_rejected() {
        let text = "{\"machines\":[\"m0\"]}\n{\"op\":\"arrive\",\"job\":3,\"procs\":{\"m0\":1.0}}\n{\"op\":\"depart\",\"job\":3}\n{\"op\":\"arrive\",\"job\":3,\"procs\":{\"m0\":1.0}}\n";
        let err = parse_trace(text).unwrap_err();
        assert!(matches!(err, TraceError::Validation { job: 3, line: Some(4), .. }), "{err:?}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_trace("{\"machines\":[\"m0\"]}\n\n{\"op\":\"arrive\",\"job\":\n").unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn unknown_machine_with_header_is_rejected() {
        let err = parse_trace("{\"machines\":[\"m0\"]}\n{\"op\":\"arrive\",\"job\":1,\"procs\":{\"m9\":1.0}}\n").unwrap_err();
        assert!(matches!(err, TraceError::Validation { job: 1, .. }));
    }

    #[test]
    fn degenerate_range_generator() {
        let t = gen_random_unrelated(1, 1, 0, (1.0, 1.0));
        assert_eq!(t.events, vec![Event::Arrive(Job { id: 0, procs: vec![(MachineId(0), 1.0)], cost: None })]);
        assert!(t.to_ndjson().contains("\"procs\":{\"m0\":1.0}"));
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = gen_random_unrelated(5, 3, 42, (1.0, 10.0)).to_ndjson();
        let b = gen_random_unrelated(5, 3, 42, (1.0, 10.0)).to_ndjson();
        let c = gen_random_unrelated(5, 3, 43, (1.0, 10.0)).to_ndjson();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(gen_restricted(6, 4, 9).to_ndjson(), gen_restricted(6, 4, 9).to_ndjson());
    }

    #[test]
    fn restricted_jobs_have_equal_times() {
        for seed in 0..20 {
            for ev in gen_restricted(8, 4, seed).events {
                let Event::Arrive(j) = ev else { unreachable!() };
                assert!(j.procs.iter().all(|&(_, p)| p == j.procs[0].1));
            }
        }
        let t = gen_restricted(1, 2, 1);
        let Event::Arrive(j) = &t.events[0] else { unreachable!() };
        assert!(!j.procs.is_empty() && j.procs.len() <= 2);
    }

    #[test]
    fn header_keeps_t_star_metadata() {
        let mut t = gen_random_unrelated(3, 2, 5, (1.0, 2.0));
        t.known_t_star = Some(vec![1.0, 1.5, 2.0]);
        let back = parse_trace(&t.to_ndjson()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn fractional_schedule_bookkeeping() {
        let jobs = JobSet::from_jobs(
            2,
            [
                Job::new(1, vec![(MachineId(0), 1.0), (MachineId(1), 2.0)]).unwrap(),
                Job::new(2, vec![(MachineId(0), 1.0)]).unwrap(),
            ],
        );
        let mut x = FractionalAssignment::new();
        x.set(1, MachineId(0), 0.5);
        x.set(1, MachineId(1), 0.5);
        x.set(2, MachineId(0), 1.0);
        assert!(x.validate(&jobs, FLOAT_TOL).is_ok());
        assert_eq!(x.loads(&jobs), vec![1.5, 1.0]);
        let mut y = x.clone();
        y.set(1, MachineId(0), 1.0);
        y.set(1, MachineId(1), 0.0);
        assert!((x.l1_distance(&y) - 1.0).abs() < 1e-12);
        assert_eq!(y.to_assignment().get(1), Some(MachineId(0)));
    }
}
