//! Two-level bucket/segment partition of one machine's interval [0, X].
//!
//! Jobs on the machine are laid out by non-increasing p (ties by id), job j
//! occupying an interval of length x_ij. Buckets tile [0, X]; each bucket is
//! a list of segments. Segments are the right vertices of the matching.

use crate::instance::JobId;

/// Length comparisons tolerance.
pub const LEN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub id: u64,
    pub len: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexUpdate {
    Insert(u64),
    Delete(u64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct JobInterval {
    id: JobId,
    p: f64,
    len: f64,
}

#[derive(Clone, Debug)]
pub struct SegmentPartition {
    eps: f64,
    jobs: Vec<JobInterval>,
    buckets: Vec<Vec<Segment>>,
    next_id: u64,
    events: usize,
}

impl SegmentPartition {
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0 && eps <= 0.125 + 1e-15, "ε must lie in (0, 1/8]");
        SegmentPartition { eps, jobs: Vec::new(), buckets: Vec::new(), next_id: 0, events: 0 }
    }

    /// Direct construction: `q = max(1, ⌊Xε/2⌋)` equal buckets, each split
    /// into segments of length 1−2ε plus a remainder.
    pub fn build(eps: f64, jobs: &[(JobId, f64, f64)]) -> Self {
        let mut part = SegmentPartition::new(eps);
        for &(id, p, len) in jobs {
            if len > 0.0 {
                part.jobs.push(JobInterval { id, p, len });
            }
        }
        part.jobs.sort_by(|a, b| b.p.total_cmp(&a.p).then(a.id.cmp(&b.id)));
        let x = part.total();
        if x > 0.0 {
            let q = ((x * eps / 2.0).floor() as usize).max(1);
            for _ in 0..q {
                let segs = part.divide(x / q as f64, &mut Vec::new());
                part.buckets.push(segs);
            }
        }
        part
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Threshold events (re-divisions, splits, merges) so far.
    pub fn events(&self) -> usize {
        self.events
    }

    pub fn total(&self) -> f64 {
        self.jobs.iter().map(|j| j.len).sum()
    }

    pub fn buckets(&self) -> &[Vec<Segment>] {
        &self.buckets
    }

    pub fn bucket_lengths(&self) -> Vec<f64> {
        self.buckets.iter().map(|b| b.iter().map(|s| s.len).sum()).collect()
    }

    pub fn job_len(&self, id: JobId) -> f64 {
        self.jobs.iter().find(|j| j.id == id).map_or(0.0, |j| j.len)
    }

    pub fn contains_job(&self, id: JobId) -> bool {
        self.jobs.iter().any(|j| j.id == id)
    }

    pub fn segment_ids(&self) -> Vec<u64> {
        self.buckets.iter().flatten().map(|s| s.id).collect()
    }

    /// Closed job intervals `(id, p, start, end)` in layout order.
    pub fn job_intervals(&self) -> Vec<(JobId, f64, f64, f64)> {
        let mut pos = 0.0;
        self.jobs
            .iter()
            .map(|j| {
                let a = pos;
                pos += j.len;
                (j.id, j.p, a, pos)
            })
            .collect()
    }

    /// Closed segment intervals `(id, start, end)` in layout order.
    pub fn segment_intervals(&self) -> Vec<(u64, f64, f64)> {
        let mut pos = 0.0;
        self.buckets
            .iter()
            .flatten()
            .map(|s| {
                let a = pos;
                pos += s.len;
                (s.id, a, pos)
            })
            .collect()
    }

    /// For every segment, the jobs whose closed interval meets it, with the
    /// overlap length `y = |seg ∩ I_j|` (zero for touching intervals).
    pub fn adjacency(&self) -> Vec<(u64, Vec<(JobId, f64)>)> {
        let jobs = self.job_intervals();
        let mut out = Vec::new();
        let mut first = 0;
        for (sid, s, e) in self.segment_intervals() {
            while first < jobs.len() && jobs[first].3 < s - LEN_TOL {
                first += 1;
            }
            let mut nbrs = Vec::new();
            let mut k = first;
            while k < jobs.len() && jobs[k].2 <= e + LEN_TOL {
                let (id, _, a, b) = jobs[k];
                if b >= s - LEN_TOL {
                    nbrs.push((id, (b.min(e) - a.max(s)).max(0.0)));
                }
                k += 1;
            }
            out.push((sid, nbrs));
        }
        out
    }

    fn fresh(&mut self, len: f64, updates: &mut Vec<VertexUpdate>) -> Segment {
        let id = self.next_id;
        self.next_id += 1;
        updates.push(VertexUpdate::Insert(id));
        Segment { id, len }
    }

    /// Segments of length 1−2ε from the left plus the remainder.
    fn divide(&mut self, len: f64, updates: &mut Vec<VertexUpdate>) -> Vec<Segment> {
        let unit = 1.0 - 2.0 * self.eps;
        let mut k = (len / unit + LEN_TOL).floor() as usize;
        let mut rest = len - k as f64 * unit;
        if rest < LEN_TOL {
            rest = 0.0;
        }
        if k == 0 && rest == 0.0 {
            k = 0;
            rest = len.max(0.0);
        }
        let mut segs = Vec::with_capacity(k + 1);
        for _ in 0..k {
            segs.push(self.fresh(unit, updates));
        }
        if rest > 0.0 || segs.is_empty() {
            segs.push(self.fresh(rest, updates));
        }
        // Absorb the drift of k·unit so lengths still sum to `len`.
        let sum: f64 = segs.iter().map(|s| s.len).sum();
        segs.last_mut().unwrap().len += len - sum;
        segs
    }

    fn redivide(&mut self, b: usize, updates: &mut Vec<VertexUpdate>) {
        self.events += 1;
        let old = std::mem::take(&mut self.buckets[b]);
        updates.extend(old.iter().map(|s| VertexUpdate::Delete(s.id)));
        let len: f64 = old.iter().map(|s| s.len).sum();
        self.buckets[b] = self.divide(len, updates);
    }

    /// Replaces bucket `b` by two halves, each re-divided.
    fn split(&mut self, b: usize, updates: &mut Vec<VertexUpdate>) {
        self.events += 1;
        let old = std::mem::take(&mut self.buckets[b]);
        updates.extend(old.iter().map(|s| VertexUpdate::Delete(s.id)));
        let len: f64 = old.iter().map(|s| s.len).sum();
        let left = self.divide(len / 2.0, updates);
        let right = self.divide(len / 2.0, updates);
        self.buckets[b] = left;
        self.buckets.insert(b + 1, right);
    }

    fn position_of(&self, id: JobId) -> Option<(usize, f64, f64)> {
        let mut pos = 0.0;
        for (k, j) in self.jobs.iter().enumerate() {
            if j.id == id {
                return Some((k, pos, pos + j.len));
            }
            pos += j.len;
        }
        None
    }

    /// First segment whose interior meets `[a, b]`, or for a point interval
    /// the first segment containing it: `(bucket, index, overlap)`.
    fn locate(&self, a: f64, b: f64) -> Option<(usize, usize, f64)> {
        let point = b - a <= LEN_TOL;
        let mut pos = 0.0;
        for (bi, bucket) in self.buckets.iter().enumerate() {
            for (si, s) in bucket.iter().enumerate() {
                let (sa, sb) = (pos, pos + s.len);
                pos = sb;
                let hit = if point { sa <= a + LEN_TOL && sb >= a - LEN_TOL } else { sa < b - LEN_TOL && sb > a + LEN_TOL };
                if hit {
                    return Some((bi, si, (sb.min(b) - sa.max(a)).max(0.0)));
                }
            }
        }
        None
    }

    /// Grows job `id` (inserted if new) by `delta`.
    pub fn increase(&mut self, id: JobId, p: f64, delta: f64) -> Vec<VertexUpdate> {
        assert!(delta >= 0.0);
        let mut updates = Vec::new();
        if self.position_of(id).is_none() {
            let at = self.jobs.iter().position(|j| j.p < p || (j.p == p && j.id > id)).unwrap_or(self.jobs.len());
            self.jobs.insert(at, JobInterval { id, p, len: 0.0 });
        }
        if self.buckets.is_empty() {
            let s = self.fresh(0.0, &mut updates);
            self.buckets.push(vec![s]);
        }
        let seg_cap = 1.0 - self.eps;
        let bucket_cap = 4.0 / self.eps;
        let mut remaining = delta;
        while remaining > 0.0 {
            let (k, a, b) = self.position_of(id).unwrap();
            let (bi, si, _) = self.locate(a, b).expect("the job's interval lies inside [0, X]");
            let seg_len = self.buckets[bi][si].len;
            let bucket_len: f64 = self.buckets[bi].iter().map(|s| s.len).sum();
            let step = remaining.min(seg_cap - seg_len).min(bucket_cap - bucket_len).max(0.0);
            self.buckets[bi][si].len += step;
            self.jobs[k].len += step;
            remaining -= step;
            if remaining < LEN_TOL {
                remaining = 0.0;
            }
            if bucket_len + step >= bucket_cap - LEN_TOL {
                self.split(bi, &mut updates);
            } else if seg_len + step >= seg_cap - LEN_TOL {
                self.redivide(bi, &mut updates);
            }
        }
        updates
    }

    /// Shrinks job `id` by `delta` (at most its length); a job that reaches
    /// zero leaves the machine.
    pub fn decrease(&mut self, id: JobId, delta: f64) -> Vec<VertexUpdate> {
        let mut updates = Vec::new();
        let Some((k0, _, _)) = self.position_of(id) else { return updates };
        let mut remaining = delta.min(self.jobs[k0].len);
        let seg_floor = 1.0 - 3.0 * self.eps;
        let bucket_floor = 1.0 / self.eps;
        while remaining > 0.0 {
            let (k, a, b) = self.position_of(id).unwrap();
            let Some((bi, si, overlap)) = self.locate(a, b) else { break };
            if b - a <= LEN_TOL {
                break;
            }
            let sole = self.buckets.len() == 1;
            let last = si + 1 == self.buckets[bi].len();
            let seg_len = self.buckets[bi][si].len;
            let bucket_len: f64 = self.buckets[bi].iter().map(|s| s.len).sum();
            let mut step = remaining.min(overlap);
            if !last {
                step = step.min(seg_len - seg_floor);
            }
            if !sole {
                step = step.min(bucket_len - bucket_floor);
            }
            let step = step.max(0.0);
            self.buckets[bi][si].len -= step;
            self.jobs[k].len -= step;
            remaining -= step;
            if remaining < LEN_TOL {
                remaining = 0.0;
            }
            if !sole && bucket_len - step <= bucket_floor + LEN_TOL {
                self.merge(bi, &mut updates);
            } else if !last && seg_len - step <= seg_floor + LEN_TOL {
                self.redivide(bi, &mut updates);
            } else if last && self.buckets[bi][si].len <= LEN_TOL && self.buckets[bi].len() > 1 {
                let s = self.buckets[bi].pop().unwrap();
                updates.push(VertexUpdate::Delete(s.id));
                self.fold_drift(bi, s.len);
            }
        }
        let (k, _, _) = self.position_of(id).unwrap();
        if self.jobs[k].len <= LEN_TOL {
            let gone = self.jobs.remove(k);
            if self.jobs.is_empty() {
                for s in self.buckets.drain(..).flatten() {
                    updates.push(VertexUpdate::Delete(s.id));
                }
            } else if gone.len != 0.0 {
                // Keep the tiling exact.
                if let Some(s) = self.buckets.iter_mut().flatten().find(|s| s.len >= gone.len) {
                    s.len -= gone.len;
                }
            }
        }
        updates
    }

    fn fold_drift(&mut self, bi: usize, drift: f64) {
        if let Some(s) = self.buckets[bi].last_mut() {
            s.len += drift;
        }
    }

    /// Merges bucket `b` into its previous neighbour (or its next one if it
    /// is first); a merged bucket longer than 3/ε is split into halves.
    fn merge(&mut self, b: usize, updates: &mut Vec<VertexUpdate>) {
        self.events += 1;
        let other = if b > 0 { b - 1 } else { b + 1 };
        let (lo, hi) = (b.min(other), b.max(other));
        let second = self.buckets.remove(hi);
        let first = std::mem::take(&mut self.buckets[lo]);
        updates.extend(first.iter().chain(&second).map(|s| VertexUpdate::Delete(s.id)));
        let len: f64 = first.iter().chain(&second).map(|s| s.len).sum();
        if len > 3.0 / self.eps {
            let left = self.divide(len / 2.0, updates);
            let right = self.divide(len / 2.0, updates);
            self.buckets[lo] = left;
            self.buckets.insert(lo + 1, right);
        } else {
            self.buckets[lo] = self.divide(len, updates);
        }
    }

    /// Tiling and length invariants.
    pub fn check(&self) -> Result<(), String> {
        let x = self.total();
        let lens = self.bucket_lengths();
        let sum: f64 = lens.iter().sum();
        let tol = 1e-7 * (1.0 + x);
        if (sum - x).abs() > tol {
            return Err(format!("buckets sum to {sum}, X = {x}"));
        }
        if self.jobs.is_empty() != self.buckets.is_empty() {
            return Err("buckets without jobs or jobs without buckets".into());
        }
        if lens.len() > 1 {
            for (b, &l) in lens.iter().enumerate() {
                if l < 1.0 / self.eps - tol || l > 4.0 / self.eps + tol {
                    return Err(format!("bucket {b} has length {l}"));
                }
            }
        } else if let Some(&l) = lens.first() {
            if l > 4.0 / self.eps + tol {
                return Err(format!("sole bucket has length {l}"));
            }
        }
        for (b, bucket) in self.buckets.iter().enumerate() {
            for (k, s) in bucket.iter().enumerate() {
                let last = k + 1 == bucket.len();
                if s.len > 1.0 - self.eps + tol || s.len < -tol {
                    return Err(format!("segment {k} of bucket {b} has length {}", s.len));
                }
                if !last && s.len < 1.0 - 3.0 * self.eps - tol {
                    return Err(format!("non-last segment {k} of bucket {b} has length {}", s.len));
                }
            }
        }
        for w in self.jobs.windows(2) {
            if w[0].p < w[1].p || (w[0].p == w[1].p && w[0].id >= w[1].id) {
                return Err("jobs out of order".into());
            }
        }
        Ok(())
    }
}
