//! (2+O(ε))-competitive rounding: per-machine segment partitions feed an
//! online matching of jobs to segments with expansion 1/(1−ε).

use std::collections::{BTreeMap, BTreeSet};

use super::partition::SegmentPartition;
use super::{RoundingError, StepReport};
use crate::instance::{Assignment, FractionalAssignment, JobId, JobSet, MachineId};
use crate::matching::OnlineMatching;

/// Slack constant in the makespan bound `(2 + C·ε)·T*`.
pub const C_TWO_EPS: f64 = 16.0;

/// Rounds `x` in one batch: partitions built directly, matching from scratch.
pub fn offline_round(jobs: &JobSet, x: &FractionalAssignment, eps: f64) -> Result<Assignment, RoundingError> {
    let mut per_machine: Vec<Vec<(JobId, f64, f64)>> = vec![Vec::new(); jobs.num_machines];
    for j in x.jobs() {
        let job = jobs.get(j).ok_or(RoundingError::UnknownJob(j))?;
        for (i, w) in x.row(j) {
            let p = job.p(i).ok_or(RoundingError::UnknownJob(j))?;
            per_machine[i.0].push((j, p, w));
        }
    }
    let mut matching: OnlineMatching<JobId, (usize, u64)> = OnlineMatching::new(1.0 / (1.0 - eps));
    let mut nbrs: BTreeMap<JobId, Vec<(usize, u64)>> = BTreeMap::new();
    for (i, list) in per_machine.iter().enumerate() {
        let part = SegmentPartition::build(eps, list);
        for (sid, adj) in part.adjacency() {
            matching.add_right((i, sid), &[])?;
            for (j, _) in adj {
                nbrs.entry(j).or_default().push((i, sid));
            }
        }
    }
    let mut sigma = Assignment::new();
    for j in x.jobs() {
        let list = nbrs.remove(&j).unwrap_or_default();
        matching.add_left(j, &list)?;
    }
    for (j, (i, _)) in matching.matching() {
        sigma.assign(j, MachineId(i));
    }
    Ok(sigma)
}

#[derive(Clone, Debug)]
struct SegVertex {
    vertex: u64,
    nbrs: BTreeSet<JobId>,
}

/// Online mode.
#[derive(Clone, Debug)]
pub struct TwoEpsRounding {
    eps: f64,
    parts: Vec<SegmentPartition>,
    prev: FractionalAssignment,
    matching: OnlineMatching<JobId, u64>,
    /// Partition segment (machine, id) to its current matching vertex.
    segs: BTreeMap<(usize, u64), SegVertex>,
    vertex_machine: BTreeMap<u64, usize>,
    next_vertex: u64,
    sigma: Assignment,
    vertex_updates: u64,
    partition_updates: u64,
}

impl TwoEpsRounding {
    pub fn new(num_machines: usize, eps: f64) -> Self {
        assert!(eps > 0.0 && eps <= 0.125 + 1e-15, "ε must lie in (0, 1/8]");
        TwoEpsRounding {
            eps,
            parts: (0..num_machines).map(|_| SegmentPartition::new(eps)).collect(),
            prev: FractionalAssignment::new(),
            matching: OnlineMatching::new(1.0 / (1.0 - eps)),
            segs: BTreeMap::new(),
            vertex_machine: BTreeMap::new(),
            next_vertex: 0,
            sigma: Assignment::new(),
            vertex_updates: 0,
            partition_updates: 0,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn sigma(&self) -> &Assignment {
        &self.sigma
    }

    pub fn partition(&self, machine: MachineId) -> &SegmentPartition {
        &self.parts[machine.0]
    }

    pub fn matching(&self) -> &OnlineMatching<JobId, u64> {
        &self.matching
    }

    /// Matching vertex inserts and deletes so far.
    pub fn vertex_updates(&self) -> u64 {
        self.vertex_updates
    }

    /// Segment inserts and deletes reported by the partitions.
    pub fn partition_updates(&self) -> u64 {
        self.partition_updates
    }

    /// Moves from the previous x to `x`; `changed` limits the rows examined.
    pub fn step(&mut self, jobs: &JobSet, x: &FractionalAssignment, changed: Option<&[JobId]>) -> Result<StepReport, RoundingError> {
        let rows: Vec<JobId> = match changed {
            Some(c) => c.to_vec(),
            None => x.jobs().chain(self.prev.jobs()).collect::<BTreeSet<_>>().into_iter().collect(),
        };
        let mut touched: BTreeSet<usize> = BTreeSet::new();
        let mut new_jobs: Vec<JobId> = Vec::new();
        let mut decreases: Vec<(usize, JobId, f64)> = Vec::new();
        let mut frac_change = 0.0;
        for &j in &rows {
            if self.matching.left_neighbors(j).is_none() && x.contains_job(j) {
                new_jobs.push(j);
            }
            let job = jobs.get(j).ok_or(RoundingError::UnknownJob(j))?;
            let machines: BTreeSet<MachineId> = x.row(j).chain(self.prev.row(j)).map(|(i, _)| i).collect();
            for i in machines {
                let d = x.get(j, i) - self.prev.get(j, i);
                frac_change += d.abs();
                if d > 0.0 {
                    let p = job.p(i).ok_or(RoundingError::UnknownJob(j))?;
                    self.partition_updates += self.parts[i.0].increase(j, p, d).len() as u64;
                    touched.insert(i.0);
                } else if d < 0.0 {
                    decreases.push((i.0, j, -d));
                }
            }
        }
        for (i, j, d) in decreases {
            self.partition_updates += self.parts[i].decrease(j, d).len() as u64;
            touched.insert(i);
        }
        for &j in &rows {
            let row: Vec<(MachineId, f64)> = x.row(j).collect();
            self.prev.remove_job(j);
            if x.contains_job(j) {
                self.prev.touch(j);
            }
            for (i, w) in row {
                self.prev.set(j, i, w);
            }
        }

        // Diff segment vertices: new, changed (reinserted) and gone.
        let mut inserts: Vec<(u64, usize, Vec<JobId>)> = Vec::new();
        let mut deletes: Vec<u64> = Vec::new();
        let new_set: BTreeSet<JobId> = new_jobs.iter().copied().collect();
        for &i in &touched {
            let adj = self.parts[i].adjacency();
            let live: BTreeSet<u64> = adj.iter().map(|(s, _)| *s).collect();
            let stale: Vec<(usize, u64)> = self.segs.range((i, 0)..=(i, u64::MAX)).map(|(&k, _)| k).filter(|&(_, s)| !live.contains(&s)).collect();
            for key in stale {
                let v = self.segs.remove(&key).unwrap();
                deletes.push(v.vertex);
            }
            for (sid, nb) in adj {
                let nbrs: BTreeSet<JobId> = nb.into_iter().map(|(j, _)| j).collect();
                let old_nbrs: BTreeSet<JobId> = self.segs.get(&(i, sid)).map(|v| v.nbrs.iter().copied().filter(|j| !new_set.contains(j)).collect()).unwrap_or_default();
                let kept: BTreeSet<JobId> = nbrs.iter().copied().filter(|j| !new_set.contains(j)).collect();
                match self.segs.get(&(i, sid)) {
                    Some(v) if old_nbrs == kept => {
                        let v = v.vertex;
                        self.segs.insert((i, sid), SegVertex { vertex: v, nbrs });
                    }
                    existing => {
                        if let Some(v) = existing {
                            deletes.push(v.vertex);
                        }
                        let vertex = self.next_vertex;
                        self.next_vertex += 1;
                        inserts.push((vertex, i, kept.into_iter().collect()));
                        self.segs.insert((i, sid), SegVertex { vertex, nbrs });
                    }
                }
            }
        }
        let mut moves = 0;
        for (v, i, nbrs) in &inserts {
            self.matching.add_right(*v, nbrs)?;
            self.vertex_machine.insert(*v, *i);
        }
        for &j in &new_jobs {
            let nbrs: Vec<u64> = self.segs.values().filter(|s| s.nbrs.contains(&j)).map(|s| s.vertex).collect();
            moves += self.matching.add_left(j, &nbrs)?;
        }
        for v in deletes.iter() {
            moves += self.matching.remove_right(*v)?;
            self.vertex_machine.remove(v);
        }
        self.vertex_updates += (inserts.len() + deletes.len()) as u64;
        let mut reassignments = 0;
        let mut next = Assignment::new();
        for (j, v) in self.matching.matching() {
            let i = MachineId(self.vertex_machine[&v]);
            if let Some(old) = self.sigma.get(j) {
                if old != i {
                    reassignments += 1;
                }
            }
            next.assign(j, i);
        }
        self.sigma = next;
        Ok(StepReport {
            reassignments,
            matching_moves: moves as u64,
            capacity_change: 0,
            vertex_updates: (inserts.len() + deletes.len()) as u64,
            fractional_change: frac_change,
            makespan: self.sigma.makespan(jobs),
        })
    }

    /// Checks `Σ_seg y = x` for every job on every machine.
    pub fn check_y_sums(&self) -> Result<(), String> {
        for (i, part) in self.parts.iter().enumerate() {
            let mut sums: BTreeMap<JobId, f64> = BTreeMap::new();
            for (_, adj) in part.adjacency() {
                for (j, y) in adj {
                    *sums.entry(j).or_default() += y;
                }
            }
            for (j, s) in sums {
                let x = part.job_len(j);
                if (s - x).abs() > 1e-7 {
                    return Err(format!("machine {i} job {j}: Σ y = {s}, x = {x}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Job;
    use crate::oracle::{brute_makespan, compute_t_star};

    fn job(id: u64, procs: &[(usize, f64)]) -> Job {
        Job::new(id, procs.iter().map(|&(i, p)| (MachineId(i), p)).collect()).unwrap()
    }

    #[test]
    fn offline_keeps_integral_input() {
        let jobs = JobSet::from_jobs(3, (0..5).map(|j| job(j, &[(0, 1.0), (1, 2.0), (2, 3.0)])));
        let mut x = FractionalAssignment::new();
        for j in 0..5 {
            x.set(j, MachineId((j % 3) as usize), 1.0);
        }
        let sigma = offline_round(&jobs, &x, 0.125).unwrap();
        for j in 0..5 {
            assert_eq!(sigma.get(j), Some(MachineId((j % 3) as usize)));
        }
        assert!(offline_round(&JobSet::new(2), &FractionalAssignment::new(), 0.125).unwrap().is_empty());
    }

    #[test]
    fn offline_three_jobs_two_machines() {
        let jobs = JobSet::from_jobs(2, (0..3).map(|j| job(j, &[(0, 1.0), (1, 1.0)])));
        let t = compute_t_star(&jobs).unwrap();
        let sigma = offline_round(&jobs, &t.x, 0.125).unwrap();
        let ms = sigma.makespan(&jobs);
        assert!(ms <= 3.2);
        assert!(ms >= brute_makespan(&jobs).unwrap());
    }

    #[test]
    fn single_job_online() {
        let jobs = JobSet::from_jobs(2, [job(0, &[(1, 0.5)])]);
        let mut x = FractionalAssignment::new();
        x.set(0, MachineId(1), 1.0);
        let mut r = TwoEpsRounding::new(2, 0.125);
        let rep = r.step(&jobs, &x, None).unwrap();
        assert_eq!(r.sigma().get(0), Some(MachineId(1)));
        assert_eq!(rep.makespan, 0.5);
        r.check_y_sums().unwrap();
        // Same x again: nothing moves.
        let rep = r.step(&jobs, &x, None).unwrap();
        assert_eq!(rep.reassignments, 0);
        assert_eq!(rep.vertex_updates, 0);
    }
}
