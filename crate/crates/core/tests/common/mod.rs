//! Seeded random generalized-flow instances shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recourse_core::genflow::{dummy_cost_formula, residual, EdgeSpec, FlowError, FlowNetwork, OnlineFlow, ResidualEdge, VertexId, SINK};

pub const MAX_COST: f64 = 50.0;
pub const GAIN_RANGE: (f64, f64) = (0.5, 1.5);

/// Internal graph plus the out-edge lists of the sources in arrival order.
#[derive(Clone, Debug)]
pub struct Ognf {
    pub net: FlowNetwork,
    pub sources: Vec<Vec<(VertexId, EdgeSpec)>>,
}

impl Ognf {
    pub fn num_edges(&self) -> usize {
        self.net.edges().iter().filter(|e| !e.dummy).count() + self.sources.iter().map(Vec::len).sum::<usize>()
    }
}

fn gain(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(GAIN_RANGE.0..=GAIN_RANGE.1)
}

/// At most 10 vertices (sink and internal), 25 real edges and 20 sources.
/// Every internal vertex gets an uncapacitated backup edge to the sink with
/// cost in [20, 50], so the dummy edges stay idle.
pub fn random_ognf(seed: u64) -> Ognf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_sources = rng.gen_range(1..=20usize);
    let k = rng.gen_range(1..=9usize.min(25 - num_sources));
    let b = dummy_cost_formula(num_sources, MAX_COST, GAIN_RANGE.1, k + 1 + num_sources);
    let mut net = FlowNetwork::new(b);
    let internal: Vec<VertexId> = (0..k).map(|i| net.add_vertex(format!("v{i}"))).collect();
    for &v in &internal {
        net.add_edge(v, SINK, EdgeSpec::uncapacitated(rng.gen_range(20.0..=50.0), gain(&mut rng))).unwrap();
    }
    // One edge per source is reserved out of the 25.
    let mut spare = 25 - k - num_sources;
    let mut inner = rng.gen_range(0..=spare.min(3 * k));
    let mut tries = 0;
    while inner > 0 && tries < 200 {
        tries += 1;
        let u = internal[rng.gen_range(0..k)];
        let v = if rng.gen_bool(0.3) { SINK } else { internal[rng.gen_range(0..k)] };
        if u == v || net.edges().iter().any(|e| !e.dummy && ((e.from, e.to) == (u, v) || (e.from, e.to) == (v, u))) {
            continue;
        }
        let spec = EdgeSpec::new(rng.gen_range(0.2..=3.0), rng.gen_range(0.0..=10.0), gain(&mut rng));
        net.add_edge(u, v, spec).unwrap();
        inner -= 1;
        spare -= 1;
    }
    let mut sources = Vec::with_capacity(num_sources);
    for _ in 0..num_sources {
        let extra = if spare > 0 && k > 1 && rng.gen_bool(0.5) { 1 } else { 0 };
        spare -= extra;
        let mut targets: Vec<VertexId> = internal.clone();
        let mut out = Vec::with_capacity(1 + extra);
        for slot in 0..=extra {
            let t = targets.swap_remove(rng.gen_range(0..targets.len()));
            let cost = rng.gen_range(0.0..=10.0);
            let spec = if slot == 0 { EdgeSpec::uncapacitated(cost, gain(&mut rng)) } else { EdgeSpec::new(rng.gen_range(0.2..=2.0), cost, gain(&mut rng)) };
            out.push((t, spec));
        }
        sources.push(out);
    }
    Ognf { net, sources }
}

/// Replays every arrival and returns the session.
pub fn replay(inst: &Ognf) -> Result<OnlineFlow, FlowError> {
    let mut flow = OnlineFlow::new(inst.net.clone());
    for (t, out) in inst.sources.iter().enumerate() {
        flow.arrive_source(format!("s{t}"), out)?;
    }
    Ok(flow)
}

/// A network on at most `max_vertices` vertices (sink and one source
/// included) with random flow values inside the capacities, and its
/// residual graph. Returns `(n, source, residual)`.
pub fn random_residual(seed: u64, max_vertices: usize) -> (usize, VertexId, Vec<ResidualEdge>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_vertices);
    let mut net = FlowNetwork::new(rng.gen_range(30.0..=200.0));
    let internal: Vec<VertexId> = (0..n - 2).map(|i| net.add_vertex(format!("v{i}"))).collect();
    for _ in 0..rng.gen_range(1..=3 * n) {
        let u = internal[rng.gen_range(0..internal.len())];
        let v = if rng.gen_bool(0.3) { SINK } else { internal[rng.gen_range(0..internal.len())] };
        if u == v {
            continue;
        }
        let cap = if rng.gen_bool(0.2) { f64::INFINITY } else { rng.gen_range(0.5..=3.0) };
        let _ = net.add_edge(u, v, EdgeSpec { capacity: cap, cost: rng.gen_range(0.0..=10.0), gain: gain(&mut rng) });
    }
    let deg = rng.gen_range(1..=internal.len().min(3));
    let out: Vec<(VertexId, EdgeSpec)> = internal[..deg].iter().map(|&v| (v, EdgeSpec::new(rng.gen_range(0.5..=2.0), rng.gen_range(0.0..=10.0), gain(&mut rng)))).collect();
    let s = net.add_source("s", &out).unwrap();
    let x: Vec<f64> = net
        .edges()
        .iter()
        .map(|e| {
            if e.dummy || e.capacity.is_infinite() {
                if rng.gen_bool(0.2) { rng.gen_range(0.0..=2.0) } else { 0.0 }
            } else {
                match rng.gen_range(0..4) {
                    0 => 0.0,
                    1 => e.capacity,
                    _ => rng.gen_range(0.0..=e.capacity),
                }
            }
        })
        .collect();
    (net.num_vertices(), s, residual(&net, &x).unwrap())
}

/// Worst-case slacks observed over one replay.
#[derive(Clone, Debug, Default)]
pub struct ReplayAudit {
    /// `max(height_{t−1}(v) − height_t(v))` over vertices present at both times.
    pub height_drop: f64,
    /// `max(cost_t − height_t(s_t))`, the height read at the end of step t.
    pub cost_excess: f64,
    pub conservation: f64,
    pub total_cost: f64,
}

/// Replays `inst`, recomputing all heights before and after every arrival.
pub fn replay_audited(inst: &Ognf) -> Result<(OnlineFlow, ReplayAudit), FlowError> {
    let mut flow = OnlineFlow::new(inst.net.clone());
    let mut audit = ReplayAudit::default();
    let mut prev = flow.heights()?;
    for (t, out) in inst.sources.iter().enumerate() {
        let rec = flow.arrive_source(format!("s{t}"), out)?;
        let h = flow.heights()?;
        audit.cost_excess = audit.cost_excess.max(rec.cost - h[rec.source]);
        for (a, b) in prev.iter().zip(&h) {
            audit.height_drop = audit.height_drop.max(a - b);
        }
        audit.conservation = audit.conservation.max(flow.net().conservation_error(flow.x()));
        prev = h;
    }
    audit.total_cost = flow.total_cost();
    Ok((flow, audit))
}

/// Random increase/decrease events on one partition, checked after each
/// against an independent length model. Returns the number of events.
pub fn partition_stress(seed: u64, events: usize, eps: f64) -> Result<usize, String> {
    use recourse_core::rounding::partition::{SegmentPartition, LEN_TOL};
    use std::collections::BTreeMap;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut part = SegmentPartition::new(eps);
    let mut model: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    let p_values = [0.25, 0.5, 1.0, 2.0, 4.0];
    for ev in 0..events {
        let grow = model.is_empty() || rng.gen_bool(0.55);
        if grow {
            let id = rng.gen_range(0..40u64);
            let p = model.get(&id).map(|&(p, _)| p).unwrap_or_else(|| p_values[rng.gen_range(0..p_values.len())]);
            let d = match rng.gen_range(0..4) {
                0 => rng.gen_range(0.0..0.05),
                1 => rng.gen_range(0.0..1.0),
                2 => rng.gen_range(1.0..6.0),
                _ => rng.gen_range(0.0..(1.0 - eps)),
            };
            part.increase(id, p, d);
            model.entry(id).or_insert((p, 0.0)).1 += d;
        } else {
            let ids: Vec<u64> = model.keys().copied().collect();
            let id = ids[rng.gen_range(0..ids.len())];
            let len = model[&id].1;
            let d = if rng.gen_bool(0.2) { len } else { rng.gen_range(0.0..=len) };
            part.decrease(id, d);
            let e = model.get_mut(&id).unwrap();
            e.1 -= d.min(e.1);
            if e.1 <= LEN_TOL {
                model.remove(&id);
            }
        }
        let fail = |msg: String| format!("event {ev}: {msg}");
        part.check().map_err(fail)?;
        let total: f64 = model.values().map(|v| v.1).sum();
        if (part.total() - total).abs() > 1e-7 * (1.0 + total) {
            return Err(fail(format!("X = {} but the model holds {total}", part.total())));
        }
        for (&id, &(_, len)) in &model {
            if (part.job_len(id) - len).abs() > 1e-7 {
                return Err(fail(format!("job {id}: {} vs model {len}", part.job_len(id))));
            }
        }
        let segs = part.segment_intervals();
        for w in segs.windows(2) {
            if (w[0].2 - w[1].1).abs() > 1e-9 {
                return Err(fail("segments do not tile".into()));
            }
        }
        if let Some(last) = segs.last() {
            if (last.2 - part.total()).abs() > 1e-7 * (1.0 + total) {
                return Err(fail("segments stop short of X".into()));
            }
        }
        let mut sums: BTreeMap<u64, f64> = BTreeMap::new();
        for (_, adj) in part.adjacency() {
            for (j, y) in adj {
                *sums.entry(j).or_default() += y;
            }
        }
        for (&id, &(_, len)) in &model {
            let s = sums.get(&id).copied().unwrap_or(0.0);
            if (s - len).abs() > 1e-7 {
                return Err(fail(format!("job {id}: Σy = {s}, x = {len}")));
            }
        }
    }
    Ok(events)
}
