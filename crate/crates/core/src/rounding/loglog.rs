//! Randomized O(log log n / log log log n) rounding. Every random choice is a
//! pure function of the master seed, so consecutive schedules are coupled.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::two_eps::offline_round;
use super::RoundingError;
use crate::instance::{Assignment, FractionalAssignment, JobId, JobSet, MachineId};

pub const DEFAULT_MARK_CONSTANT: f64 = 10.0;
pub const MAX_TRIES: usize = 1_000_000;
/// Small-load constant `C_s` in `small load ≤ C_s·T*`.
pub const SMALL_LOAD_CONSTANT: f64 = 8.0;
pub const FAILED_LOAD_CONSTANT: f64 = 200.0;

/// `log₂ max(n, 4)`.
pub fn log_n(n: usize) -> f64 {
    (n.max(4) as f64).log2()
}

/// `log log n / log log log n`, the inner log clamped at 2.
pub fn loglog_ratio(n: usize) -> f64 {
    let ll = log_n(n).log2();
    ll / ll.max(2.0).log2()
}

/// Sparsified value of one big edge.
pub fn sparsify_value(x: f64, delta: f64, log_n: f64) -> f64 {
    let unit = 1.0 / log_n;
    if x >= unit {
        x
    } else if delta > x {
        0.0
    } else {
        unit
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum JobClass {
    Small,
    /// Big and placed at its step-(b2) target.
    Big,
    /// Big, on a marked machine or without enough sparsified mass.
    Failed,
}

#[derive(Clone, Debug)]
pub struct Seeds {
    pub beta: f64,
    pick: [u8; 32],
    delta: [u8; 32],
}

impl Seeds {
    pub fn new(master: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        let beta = rng.gen_range(0.5..=0.75);
        Seeds { beta, pick: rng.gen(), delta: rng.gen() }
    }

    /// `δ_ij ∈ [0, 1/log n]`.
    pub fn delta(&self, job: JobId, machine: MachineId, log_n: f64) -> f64 {
        let mut rng = ChaCha8Rng::from_seed(self.delta);
        rng.set_stream(job);
        rng.set_word_pos(2 * machine.0 as u128);
        rng.gen::<f64>() / log_n
    }

    /// The job's `(h_o, θ_o)` sequence, `h_o` indexing `nbrs`.
    pub fn picks(&self, job: JobId, degree: usize) -> impl Iterator<Item = (usize, f64)> {
        let mut rng = ChaCha8Rng::from_seed(self.pick);
        rng.set_stream(job);
        std::iter::repeat_with(move || (rng.gen_range(0..degree), rng.gen::<f64>()))
    }
}

/// First index whose `h` passes `accept(h, θ)`.
fn first_accepted(seeds: &Seeds, job: JobId, nbrs: &[MachineId], accept: impl Fn(MachineId, f64) -> bool) -> Result<MachineId, RoundingError> {
    seeds
        .picks(job, nbrs.len())
        .take(MAX_TRIES)
        .find(|&(h, theta)| accept(nbrs[h], theta))
        .map(|(h, _)| nbrs[h])
        .ok_or(RoundingError::SeedExhaustion { job, tries: MAX_TRIES })
}

#[derive(Clone, Debug, Default)]
pub struct Snapshot {
    pub class: BTreeMap<JobId, JobClass>,
    pub x_sparse: FractionalAssignment,
    pub targets: BTreeMap<JobId, MachineId>,
    pub marked: BTreeSet<usize>,
    /// Big jobs with `Σ x′ < 1/10`.
    pub low_mass: Vec<JobId>,
    /// Failed-job components as `(machines, jobs)`.
    pub components: Vec<(Vec<usize>, Vec<JobId>)>,
    pub sigma: Assignment,
    pub small_load: Vec<f64>,
    pub big_load: Vec<f64>,
    pub failed_load: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoglogStep {
    /// Changed jobs by type: class switch, small, big target, failed.
    pub recourse: [u64; 4],
    pub makespan: f64,
    pub fractional_change: f64,
    pub marked: usize,
    pub failed: usize,
    pub low_mass: usize,
    pub small_violations: usize,
    pub failed_violations: usize,
    pub max_component: usize,
}

impl LoglogStep {
    pub fn total_recourse(&self) -> u64 {
        self.recourse.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct LoglogRounding {
    t_eff: f64,
    n: usize,
    c: f64,
    seeds: Seeds,
    prev: Option<Snapshot>,
    prev_x: FractionalAssignment,
    component_hist: BTreeMap<usize, u64>,
    low_mass_events: u64,
}

impl LoglogRounding {
    /// `t_eff` is the makespan of the fractional input, `n` the number of jobs.
    pub fn new(t_eff: f64, n: usize, master_seed: u64) -> Self {
        LoglogRounding {
            t_eff,
            n,
            c: DEFAULT_MARK_CONSTANT,
            seeds: Seeds::new(master_seed),
            prev: None,
            prev_x: FractionalAssignment::new(),
            component_hist: BTreeMap::new(),
            low_mass_events: 0,
        }
    }

    pub fn with_mark_constant(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn seeds(&self) -> &Seeds {
        &self.seeds
    }

    pub fn threshold(&self) -> f64 {
        self.c * loglog_ratio(self.n) * self.t_eff
    }

    /// `(c·loglog/logloglog + 220)·T`.
    pub fn makespan_bound(&self) -> f64 {
        self.threshold() + (1.0 + SMALL_LOAD_CONSTANT + FAILED_LOAD_CONSTANT + 11.0) * self.t_eff
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.prev.as_ref()
    }

    /// Number of failed-job components by machine count, over all steps.
    pub fn component_histogram(&self) -> &BTreeMap<usize, u64> {
        &self.component_hist
    }

    pub fn low_mass_events(&self) -> u64 {
        self.low_mass_events
    }

    fn is_big_edge(&self, p: f64) -> bool {
        p >= self.t_eff / log_n(self.n)
    }

    /// Big jobs and their big-edge mass.
    pub fn classify(&self, jobs: &JobSet, x: &FractionalAssignment) -> BTreeMap<JobId, bool> {
        x.jobs()
            .map(|j| {
                let job = jobs.get(j).expect("x row of a known job");
                let mass: f64 = x.row(j).filter(|&(i, _)| job.p(i).is_some_and(|p| self.is_big_edge(p))).map(|(_, w)| w).sum();
                (j, mass > self.seeds.beta)
            })
            .collect()
    }

    /// Runs the whole pipeline on `x`.
    pub fn round(&self, jobs: &JobSet, x: &FractionalAssignment) -> Result<Snapshot, RoundingError> {
        let m = jobs.num_machines;
        let ln = log_n(self.n);
        let big = self.classify(jobs, x);
        let mut snap = Snapshot {
            small_load: vec![0.0; m],
            big_load: vec![0.0; m],
            failed_load: vec![0.0; m],
            ..Snapshot::default()
        };
        let mut target_load = vec![0.0; m];
        let mut failed: Vec<JobId> = Vec::new();
        // Support used for the failed-job graph.
        let mut support = FractionalAssignment::new();
        for (&j, &is_big) in &big {
            let job = jobs.get(j).ok_or(RoundingError::UnknownJob(j))?;
            let nbrs: Vec<MachineId> = job.machines().collect();
            if !is_big {
                let i = first_accepted(&self.seeds, j, &nbrs, |h, theta| job.p(h).is_some_and(|p| !self.is_big_edge(p)) && theta <= x.get(j, h))?;
                snap.class.insert(j, JobClass::Small);
                snap.small_load[i.0] += job.p(i).unwrap();
                snap.sigma.assign(j, i);
                continue;
            }
            let mut mass = 0.0;
            for (i, w) in x.row(j) {
                let p = job.p(i).unwrap();
                if !self.is_big_edge(p) {
                    continue;
                }
                let v = sparsify_value(w, self.seeds.delta(j, i, ln), ln);
                if v > 0.0 {
                    snap.x_sparse.set(j, i, v);
                    support.set(j, i, v);
                    mass += v;
                }
            }
            if mass < 0.1 {
                snap.low_mass.push(j);
                if mass == 0.0 {
                    for (i, w) in x.row(j).filter(|&(i, _)| self.is_big_edge(job.p(i).unwrap())) {
                        support.set(j, i, w);
                    }
                }
                failed.push(j);
                continue;
            }
            let i = first_accepted(&self.seeds, j, &nbrs, |h, theta| theta <= snap.x_sparse.get(j, h))?;
            snap.targets.insert(j, i);
            target_load[i.0] += job.p(i).unwrap();
        }
        let threshold = self.threshold();
        snap.marked = (0..m).filter(|&i| target_load[i] > threshold).collect();
        for (&j, &i) in &snap.targets {
            if snap.marked.contains(&i.0) {
                failed.push(j);
            } else {
                snap.class.insert(j, JobClass::Big);
                snap.big_load[i.0] += jobs.get(j).unwrap().p(i).unwrap();
                snap.sigma.assign(j, i);
            }
        }
        failed.sort_unstable();
        for &j in &failed {
            snap.class.insert(j, JobClass::Failed);
        }
        snap.components = components(&support, &failed);
        for (_, comp_jobs) in &snap.components {
            let sub = jobs.subset(comp_jobs.iter().copied());
            let mut xc = FractionalAssignment::new();
            for &j in comp_jobs {
                let s = support.row_sum(j);
                for (i, w) in support.row(j) {
                    xc.set(j, i, w / s);
                }
            }
            let sigma = match offline_round(&sub, &xc, 0.125) {
                Ok(s) => s,
                Err(_) => fallback_round(&xc),
            };
            for (j, i) in sigma.iter() {
                snap.failed_load[i.0] += sub.get(j).unwrap().p(i).unwrap();
                snap.sigma.assign(j, i);
            }
        }
        Ok(snap)
    }

    /// Rounds `x` and diffs against the previous schedule.
    pub fn step(&mut self, jobs: &JobSet, x: &FractionalAssignment) -> Result<LoglogStep, RoundingError> {
        let snap = self.round(jobs, x)?;
        let mut rec = LoglogStep {
            makespan: snap.sigma.makespan(jobs),
            fractional_change: x.l1_distance(&self.prev_x),
            marked: snap.marked.len(),
            failed: snap.class.values().filter(|&&c| c == JobClass::Failed).count(),
            low_mass: snap.low_mass.len(),
            ..LoglogStep::default()
        };
        if let Some(prev) = &self.prev {
            for (j, i) in snap.sigma.iter() {
                let Some(old) = prev.sigma.get(j) else { continue };
                if old == i {
                    continue;
                }
                let (a, b) = (prev.class[&j], snap.class[&j]);
                let ty = if (a == JobClass::Small) != (b == JobClass::Small) {
                    0
                } else if a == JobClass::Small {
                    1
                } else if a == JobClass::Big && b == JobClass::Big {
                    2
                } else {
                    3
                };
                rec.recourse[ty] += 1;
            }
        }
        let small_cap = SMALL_LOAD_CONSTANT * self.t_eff;
        let failed_cap = FAILED_LOAD_CONSTANT * self.t_eff;
        rec.small_violations = snap.small_load.iter().filter(|&&l| l > small_cap + 1e-9).count();
        rec.failed_violations = snap.failed_load.iter().filter(|&&l| l > failed_cap + 1e-9).count();
        for (machines, _) in &snap.components {
            *self.component_hist.entry(machines.len()).or_default() += 1;
            rec.max_component = rec.max_component.max(machines.len());
        }
        self.low_mass_events += snap.low_mass.len() as u64;
        self.prev_x = x.clone();
        self.prev = Some(snap);
        Ok(rec)
    }

    /// Makespan decomposition of the last schedule; returns the first
    /// machine breaking a bound.
    pub fn check_decomposition(&self, jobs: &JobSet) -> Result<(), RoundingError> {
        let Some(snap) = &self.prev else { return Ok(()) };
        let max_p = jobs.max_p().min(self.t_eff);
        let big_cap = self.threshold() + max_p;
        let loads = snap.sigma.loads(jobs);
        for i in 0..jobs.num_machines {
            let bad = snap.big_load[i] > big_cap + 1e-9 || loads[i] > self.makespan_bound() + 1e-9;
            if bad {
                let terms = format!("small {}, big {}, failed {}", snap.small_load[i], snap.big_load[i], snap.failed_load[i]);
                return Err(RoundingError::BoundViolation { machine: i, load: loads[i], bound: self.makespan_bound(), terms });
            }
        }
        Ok(())
    }
}

/// Each job to its heaviest machine.
fn fallback_round(x: &FractionalAssignment) -> Assignment {
    let mut sigma = Assignment::new();
    for j in x.jobs() {
        if let Some((i, _)) = x.row(j).max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0))) {
            sigma.assign(j, i);
        }
    }
    sigma
}

/// Connected components of the bipartite support graph restricted to `jobs`.
fn components(support: &FractionalAssignment, jobs: &[JobId]) -> Vec<(Vec<usize>, Vec<JobId>)> {
    let mut machine_jobs: BTreeMap<usize, Vec<JobId>> = BTreeMap::new();
    for &j in jobs {
        for (i, _) in support.row(j) {
            machine_jobs.entry(i.0).or_default().push(j);
        }
    }
    let mut seen: BTreeSet<JobId> = BTreeSet::new();
    let mut out = Vec::new();
    for &start in jobs {
        if !seen.insert(start) {
            continue;
        }
        let mut comp_jobs = vec![start];
        let mut comp_machines = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(j) = stack.pop() {
            for (i, _) in support.row(j) {
                if comp_machines.insert(i.0) {
                    for &k in &machine_jobs[&i.0] {
                        if seen.insert(k) {
                            comp_jobs.push(k);
                            stack.push(k);
                        }
                    }
                }
            }
        }
        comp_jobs.sort_unstable();
        out.push((comp_machines.into_iter().collect(), comp_jobs));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Job;

    fn job(id: u64, procs: &[(usize, f64)]) -> Job {
        Job::new(id, procs.iter().map(|&(i, p)| (MachineId(i), p)).collect()).unwrap()
    }

    #[test]
    fn sparsify_cases() {
        let ln = 8.0;
        assert_eq!(sparsify_value(0.125, 0.1, ln), 0.125);
        assert_eq!(sparsify_value(0.0, 0.01, ln), 0.0);
        assert_eq!(sparsify_value(0.05, 0.06, ln), 0.0);
        assert_eq!(sparsify_value(0.05, 0.04, ln), 0.125);
    }

    #[test]
    fn sparsify_is_unbiased() {
        let seeds = Seeds::new(3);
        let ln = log_n(512);
        let x = 0.04;
        let draws = 100_000u64;
        let mean: f64 = (0..draws).map(|j| sparsify_value(x, seeds.delta(j, MachineId(0), ln), ln)).sum::<f64>() / draws as f64;
        // Bernoulli(x·log n) scaled by 1/log n.
        let q = x * ln;
        let sd = (q * (1.0 - q) / draws as f64).sqrt() / ln;
        assert!((mean - x).abs() <= 3.0 * sd, "{mean}");
    }

    #[test]
    fn classify_threshold() {
        let jobs = JobSet::from_jobs(2, [job(0, &[(0, 1.0), (1, 0.01)])]);
        let mut x = FractionalAssignment::new();
        x.set(0, MachineId(0), 0.6);
        x.set(0, MachineId(1), 0.4);
        let mut r = LoglogRounding::new(1.0, 16, 0);
        r.seeds.beta = 0.55;
        assert!(r.classify(&jobs, &x)[&0]);
        r.seeds.beta = 0.65;
        assert!(!r.classify(&jobs, &x)[&0]);
    }

    #[test]
    fn single_small_machine() {
        let jobs = JobSet::from_jobs(3, [job(0, &[(0, 0.01), (1, 0.01), (2, 0.01)])]);
        let mut x = FractionalAssignment::new();
        x.set(0, MachineId(2), 1.0);
        let r = LoglogRounding::new(1.0, 16, 9);
        let snap = r.round(&jobs, &x).unwrap();
        assert_eq!(snap.sigma.get(0), Some(MachineId(2)));
        assert_eq!(snap.class[&0], JobClass::Small);
    }

    #[test]
    fn same_x_gives_zero_recourse() {
        let trace = crate::instance::gen_random_unrelated(40, 4, 1, (0.1, 1.0));
        let jobs = trace.all_jobs();
        let t = crate::oracle::compute_t_star(&jobs).unwrap();
        let mut r = LoglogRounding::new(t.value, 40, 77);
        r.step(&jobs, &t.x).unwrap();
        let again = r.step(&jobs, &t.x).unwrap();
        assert_eq!(again.recourse, [0; 4]);
        r.check_decomposition(&jobs).unwrap();
    }

    #[test]
    fn concentrated_targets_are_marked() {
        // 30 unit jobs all fully on machine 0 with a tiny mark constant.
        let jobs = JobSet::from_jobs(2, (0..30).map(|j| job(j, &[(0, 1.0), (1, 1.0)])));
        let mut x = FractionalAssignment::new();
        for j in 0..30 {
            x.set(j, MachineId(0), 1.0);
        }
        let r = LoglogRounding::new(1.0, 30, 4).with_mark_constant(1.0);
        let snap = r.round(&jobs, &x).unwrap();
        assert!(snap.marked.contains(&0));
        assert!(snap.class.values().all(|&c| c == JobClass::Failed));
        assert_eq!(snap.sigma.len(), 30);
    }
}
