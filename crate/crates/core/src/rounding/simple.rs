//! O(1)-competitive rounding with a random offset: right vertices v_ik
//! (machine i, size class k) get capacity ⌈2f_ik + ρ⌉ and jobs are kept
//! b-matched to them.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RoundingError, StepReport};
use crate::instance::{Assignment, FractionalAssignment, JobId, JobSet, MachineId};
use crate::matching::OnlineMatching;

pub type BucketVertex = (usize, u32);

/// `⌈2f + ρ⌉`, with round-off below 1e-9 ignored.
pub fn capacity(f: f64, rho: f64) -> usize {
    let v = 2.0 * f + rho;
    let c = v.ceil();
    if c - v > 1.0 - 1e-9 {
        (c - 1.0).max(0.0) as usize
    } else {
        c.max(0.0) as usize
    }
}

/// `K = ⌈2 log₂ n⌉`.
pub fn num_classes(n: usize) -> u32 {
    (2.0 * (n.max(2) as f64).log2()).ceil() as u32
}

/// Size class of `p`: `T*/2^{k+1} < p ≤ T*/2^k`, clamped to `[0, K]`.
pub fn size_class(t_star: f64, p: f64, k_max: u32) -> u32 {
    let k = (t_star / p).log2().floor();
    if k <= 0.0 {
        0
    } else {
        (k as u32).min(k_max)
    }
}

/// `C = 4ε + 9` in the load bound `C·T*`.
pub fn load_constant(eps: f64) -> f64 {
    4.0 * eps + 9.0
}

/// Mean of `|⌈f+ρ⌉ − ⌈f′+ρ⌉|` over uniform offsets.
pub fn offset_gap_mean(f: f64, f2: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..draws {
        let rho: f64 = rng.gen();
        sum += ((f + rho).ceil() - (f2 + rho).ceil()).abs();
    }
    sum / draws as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct MachineLoad {
    pub machine: usize,
    pub load: f64,
    /// `(class, jobs matched there, their load, capacity)`.
    pub terms: Vec<(u32, usize, f64, usize)>,
}

#[derive(Clone, Debug)]
pub struct SimpleRounding {
    t_star: f64,
    eps: f64,
    rho: f64,
    n_hat: usize,
    k_max: u32,
    streaming: bool,
    matching: OnlineMatching<JobId, BucketVertex>,
    f: BTreeMap<BucketVertex, f64>,
    prev: FractionalAssignment,
    sigma: Assignment,
    capacity_change: u64,
    rebuilds: usize,
    rebuild_reassignments: u64,
}

impl SimpleRounding {
    /// Offline-known n; ρ is drawn from `seed`.
    pub fn new(t_star: f64, eps: f64, n: usize, seed: u64) -> Self {
        let rho = ChaCha8Rng::seed_from_u64(seed).gen::<f64>();
        Self::with_rho(t_star, eps, n, rho)
    }

    pub fn with_rho(t_star: f64, eps: f64, n: usize, rho: f64) -> Self {
        assert!((0.0..1.0).contains(&rho));
        SimpleRounding {
            t_star,
            eps,
            rho,
            n_hat: n.max(2),
            k_max: num_classes(n),
            streaming: false,
            matching: OnlineMatching::new(2.0),
            f: BTreeMap::new(),
            prev: FractionalAssignment::new(),
            sigma: Assignment::new(),
            capacity_change: 0,
            rebuilds: 0,
            rebuild_reassignments: 0,
        }
    }

    /// Unknown n: the estimate starts at 4 and doubles on overflow, each time
    /// re-indexing the size classes and rebuilding the matching.
    pub fn streaming(t_star: f64, eps: f64, seed: u64) -> Self {
        let mut r = Self::new(t_star, eps, 4, seed);
        r.streaming = true;
        r
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn sigma(&self) -> &Assignment {
        &self.sigma
    }

    pub fn matching(&self) -> &OnlineMatching<JobId, BucketVertex> {
        &self.matching
    }

    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    pub fn rebuild_reassignments(&self) -> u64 {
        self.rebuild_reassignments
    }

    pub fn total_capacity_change(&self) -> u64 {
        self.capacity_change
    }

    fn vertices_of(&self, jobs: &JobSet, j: JobId) -> Vec<BucketVertex> {
        let job = jobs.get(j).expect("known job");
        job.procs.iter().filter(|&&(_, p)| p <= self.t_star * (1.0 + 1e-12)).map(|&(i, p)| (i.0, size_class(self.t_star, p, self.k_max))).collect()
    }

    fn target(&self, v: BucketVertex) -> usize {
        capacity(self.f.get(&v).copied().unwrap_or(0.0).max(0.0), self.rho)
    }

    pub fn step(&mut self, jobs: &JobSet, x: &FractionalAssignment, changed: Option<&[JobId]>) -> Result<StepReport, RoundingError> {
        let rows: Vec<JobId> = match changed {
            Some(c) => c.to_vec(),
            None => x.jobs().chain(self.prev.jobs()).collect::<BTreeSet<_>>().into_iter().collect(),
        };
        let new_jobs: Vec<JobId> = rows.iter().copied().filter(|&j| x.contains_job(j) && self.matching.left_neighbors(j).is_none()).collect();
        if self.streaming && self.matching.num_left() + new_jobs.len() > self.n_hat {
            return self.rebuild(jobs, x, &rows);
        }
        let mut touched: BTreeSet<BucketVertex> = BTreeSet::new();
        let mut frac_change = 0.0;
        for &j in &rows {
            let job = jobs.get(j).ok_or(RoundingError::UnknownJob(j))?;
            let machines: BTreeSet<MachineId> = x.row(j).chain(self.prev.row(j)).map(|(i, _)| i).collect();
            for i in machines {
                let d = x.get(j, i) - self.prev.get(j, i);
                if d == 0.0 {
                    continue;
                }
                frac_change += d.abs();
                let p = job.p(i).ok_or(RoundingError::UnknownJob(j))?;
                let v = (i.0, size_class(self.t_star, p, self.k_max));
                *self.f.entry(v).or_default() += d;
                touched.insert(v);
            }
            self.prev.remove_job(j);
            if x.contains_job(j) {
                self.prev.touch(j);
                for (i, w) in x.row(j) {
                    self.prev.set(j, i, w);
                }
            }
        }
        for &j in &new_jobs {
            for v in self.vertices_of(jobs, j) {
                if !self.matching.contains_right(v) {
                    let b = self.target(v);
                    self.matching.add_right_capacitated(v, b, &[])?;
                }
            }
        }
        let mut cap_change = 0u64;
        let mut shrink = Vec::new();
        for &v in &touched {
            let Some(cur) = self.matching.capacity(v) else { continue };
            let b = self.target(v);
            cap_change += b.abs_diff(cur) as u64;
            if b > cur {
                self.matching.set_capacity(v, b)?;
            } else if b < cur {
                shrink.push((v, b));
            }
        }
        let mut moves = 0;
        for &j in &new_jobs {
            let nbrs = self.vertices_of(jobs, j);
            moves += self.matching.add_left(j, &nbrs)?;
        }
        for (v, b) in shrink {
            moves += self.matching.set_capacity(v, b)?;
        }
        self.capacity_change += cap_change;
        let reassignments = self.refresh_sigma();
        Ok(StepReport {
            reassignments,
            matching_moves: moves as u64,
            capacity_change: cap_change,
            vertex_updates: 0,
            fractional_change: frac_change,
            makespan: self.sigma.makespan(jobs),
        })
    }

    fn refresh_sigma(&mut self) -> u64 {
        let mut moved = 0;
        let mut next = Assignment::new();
        for (j, (i, _)) in self.matching.matching() {
            let i = MachineId(i);
            if self.sigma.get(j).is_some_and(|old| old != i) {
                moved += 1;
            }
            next.assign(j, i);
        }
        self.sigma = next;
        moved
    }

    /// Doubles n̂ and rebuilds classes, capacities and the matching.
    fn rebuild(&mut self, jobs: &JobSet, x: &FractionalAssignment, rows: &[JobId]) -> Result<StepReport, RoundingError> {
        let arrived = self.matching.num_left() + rows.iter().filter(|&&j| self.matching.left_neighbors(j).is_none() && x.contains_job(j)).count();
        while self.n_hat < arrived {
            self.n_hat *= 2;
        }
        self.k_max = num_classes(self.n_hat);
        self.rebuilds += 1;
        let frac_change: f64 = rows.iter().map(|&j| x.job_l1_distance(&self.prev, j)).sum();
        let old_caps: BTreeMap<BucketVertex, f64> = self.f.clone();
        self.prev = x.clone();
        self.f.clear();
        for j in x.jobs() {
            let job = jobs.get(j).ok_or(RoundingError::UnknownJob(j))?;
            for (i, w) in x.row(j) {
                let p = job.p(i).ok_or(RoundingError::UnknownJob(j))?;
                *self.f.entry((i.0, size_class(self.t_star, p, self.k_max))).or_default() += w;
            }
        }
        let mut cap_change = 0u64;
        let keys: BTreeSet<BucketVertex> = old_caps.keys().chain(self.f.keys()).copied().collect();
        for v in keys {
            let old = capacity(old_caps.get(&v).copied().unwrap_or(0.0).max(0.0), self.rho);
            cap_change += old.abs_diff(self.target(v)) as u64;
        }
        self.matching = OnlineMatching::new(2.0);
        let mut moves = 0;
        for j in x.jobs() {
            for v in self.vertices_of(jobs, j) {
                if !self.matching.contains_right(v) {
                    let b = self.target(v);
                    self.matching.add_right_capacitated(v, b, &[])?;
                }
            }
            let nbrs = self.vertices_of(jobs, j);
            moves += self.matching.add_left(j, &nbrs)?;
        }
        self.capacity_change += cap_change;
        let reassignments = self.refresh_sigma();
        self.rebuild_reassignments += reassignments;
        Ok(StepReport {
            reassignments,
            matching_moves: moves as u64,
            capacity_change: cap_change,
            vertex_updates: 0,
            fractional_change: frac_change,
            makespan: self.sigma.makespan(jobs),
        })
    }

    /// Per-machine load split by size class; errors if a machine exceeds
    /// `(4ε+9)·T*`.
    pub fn check_load_bound(&self, jobs: &JobSet) -> Result<Vec<MachineLoad>, RoundingError> {
        let mut per: BTreeMap<usize, BTreeMap<u32, (usize, f64)>> = BTreeMap::new();
        for (j, (i, k)) in self.matching.matching() {
            let p = jobs.get(j).and_then(|job| job.p(MachineId(i))).ok_or(RoundingError::UnknownJob(j))?;
            let e = per.entry(i).or_default().entry(k).or_default();
            e.0 += 1;
            e.1 += p;
        }
        let bound = load_constant(self.eps) * self.t_star;
        let mut out = Vec::new();
        for (i, classes) in per {
            let terms: Vec<(u32, usize, f64, usize)> =
                classes.into_iter().map(|(k, (c, l))| (k, c, l, self.matching.capacity((i, k)).unwrap_or(0))).collect();
            let load: f64 = terms.iter().map(|t| t.2).sum();
            if load > bound + 1e-9 {
                let terms = terms.iter().map(|(k, c, l, b)| format!("k={k}: {c} jobs, load {l}, b={b}")).collect::<Vec<_>>().join(", ");
                return Err(RoundingError::BoundViolation { machine: i, load, bound, terms });
            }
            out.push(MachineLoad { machine: i, load, terms });
        }
        Ok(out)
    }
}
