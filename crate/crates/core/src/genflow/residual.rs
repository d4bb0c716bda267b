use super::network::{EdgeId, FlowNetwork, VertexId, SINK};
use super::FlowError;

/// Flows within this distance of 0 or of the capacity snap to the bound.
pub const SNAP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualEdge {
    pub edge: EdgeId,
    pub dir: Direction,
    pub from: VertexId,
    pub to: VertexId,
    pub capacity: f64,
    pub cost: f64,
    pub gain: f64,
}

/// Residual graph edges ordered by original edge, forward before backward.
pub fn residual(net: &FlowNetwork, x: &[f64]) -> Result<Vec<ResidualEdge>, FlowError> {
    let mut out = Vec::with_capacity(net.num_edges() + net.num_edges() / 2);
    for (k, e) in net.edges().iter().enumerate() {
        let xe = x[k];
        if xe > e.capacity + 1e-9 || xe < -1e-9 {
            return Err(FlowError::CapacityViolation { edge: k, flow: xe, capacity: e.capacity });
        }
        if xe < e.capacity {
            out.push(ResidualEdge {
                edge: k,
                dir: Direction::Forward,
                from: e.from,
                to: e.to,
                capacity: e.capacity - xe,
                cost: e.cost,
                gain: e.gain,
            });
        }
        if xe > 0.0 {
            out.push(ResidualEdge {
                edge: k,
                dir: Direction::Backward,
                from: e.to,
                to: e.from,
                capacity: e.gain * xe,
                cost: 0.0,
                gain: 1.0 / e.gain,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureKind {
    PathToSink,
    CycleThroughSource,
    Lollipop,
}

/// A unit-excess augmenting structure with its multipliers, in walk order.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentingStructure {
    pub kind: StructureKind,
    pub source: VertexId,
    pub arcs: Vec<(ResidualEdge, f64)>,
    /// Index in `arcs` where the cycle starts (cycle and lollipop kinds).
    pub cycle_start: Option<usize>,
    pub cost: f64,
}

impl AugmentingStructure {
    /// Builds the structure traced by a walk from `source` that either ends at
    /// the sink or closes a cycle on its last edge. Returns `None` when the
    /// walk is not of that shape or its cycle does not absorb flow.
    pub fn from_walk(source: VertexId, walk: &[ResidualEdge]) -> Option<Self> {
        let first = walk.first()?;
        if first.from != source {
            return None;
        }
        for w in walk.windows(2) {
            if w[0].to != w[1].from {
                return None;
            }
        }
        let last = walk.last().unwrap();
        let tails: Vec<VertexId> = walk.iter().map(|a| a.from).collect();
        {
            let mut seen = std::collections::HashSet::new();
            if !tails.iter().all(|v| seen.insert(*v)) || tails.contains(&SINK) {
                return None;
            }
        }
        let mut mult = Vec::with_capacity(walk.len());
        if last.to == SINK {
            let mut a = 1.0;
            for arc in walk {
                mult.push(a);
                a *= arc.gain;
            }
            return Some(Self::finish(StructureKind::PathToSink, source, walk, mult, None));
        }
        let c = tails.iter().position(|&v| v == last.to)?;
        let mut arrive = 1.0;
        for arc in &walk[..c] {
            mult.push(arrive);
            arrive *= arc.gain;
        }
        let g: f64 = walk[c..].iter().map(|a| a.gain).product();
        if !(g < 1.0) {
            return None;
        }
        let mut b = arrive / (1.0 - g);
        for arc in &walk[c..] {
            mult.push(b);
            b *= arc.gain;
        }
        let kind = if c == 0 { StructureKind::CycleThroughSource } else { StructureKind::Lollipop };
        Some(Self::finish(kind, source, walk, mult, Some(c)))
    }

    fn finish(kind: StructureKind, source: VertexId, walk: &[ResidualEdge], mult: Vec<f64>, cycle_start: Option<usize>) -> Self {
        let cost = walk.iter().zip(&mult).map(|(a, f)| a.cost * f).sum();
        AugmentingStructure { kind, source, arcs: walk.iter().copied().zip(mult).collect(), cycle_start, cost }
    }

    /// Excess `Σ_out f − Σ_in γ f` at `v`.
    pub fn excess(&self, v: VertexId) -> f64 {
        self.arcs
            .iter()
            .map(|(a, f)| if a.from == v { *f } else { 0.0 } - if a.to == v { a.gain * f } else { 0.0 })
            .sum()
    }

    pub fn vertices(&self) -> Vec<VertexId> {
        let mut v: Vec<VertexId> = self.arcs.iter().map(|(a, _)| a.from).collect();
        if self.kind == StructureKind::PathToSink {
            v.push(SINK);
        }
        v
    }

    /// Net change rate of `x_e` per unit of θ for every touched edge.
    pub fn edge_rates(&self) -> Vec<(EdgeId, f64)> {
        let mut rates: Vec<(EdgeId, f64)> = Vec::new();
        for (a, f) in &self.arcs {
            let r = match a.dir {
                Direction::Forward => *f,
                Direction::Backward => -f * a.gain,
            };
            match rates.iter_mut().find(|(e, _)| *e == a.edge) {
                Some(slot) => slot.1 += r,
                None => rates.push((a.edge, r)),
            }
        }
        rates
    }

    /// Split at an interior vertex `v`: a unit flow path from the
    /// source to `v` plus `scale` times a unit structure from `v`.
    pub fn split_at(&self, v: VertexId) -> Option<(Vec<(ResidualEdge, f64)>, AugmentingStructure, f64)> {
        let k = self.arcs.iter().position(|(a, _)| a.from == v)?;
        if k == 0 {
            return None;
        }
        let mut prefix = Vec::with_capacity(k);
        let mut a = 1.0;
        for (arc, _) in &self.arcs[..k] {
            prefix.push((*arc, a));
            a *= arc.gain;
        }
        let arcs: Vec<ResidualEdge> = self.arcs.iter().map(|(arc, _)| *arc).collect();
        let walk: Vec<ResidualEdge> = match self.cycle_start {
            Some(c) if k > c => arcs[k..].iter().chain(&arcs[c..k]).copied().collect(),
            _ => arcs[k..].to_vec(),
        };
        let unit = AugmentingStructure::from_walk(v, &walk)?;
        Some((prefix, unit, a))
    }
}

/// Largest θ keeping every touched edge within `[0, μ]` with at most
/// `remaining` more units leaving the source.
pub fn max_step(net: &FlowNetwork, x: &[f64], f: &AugmentingStructure, remaining: f64) -> Result<f64, FlowError> {
    let mut theta = remaining;
    for (e, r) in f.edge_rates() {
        let edge = net.edge(e);
        if r > 0.0 && edge.capacity.is_finite() {
            theta = theta.min((edge.capacity - x[e]).max(0.0) / r);
        } else if r < 0.0 {
            theta = theta.min(x[e].max(0.0) / -r);
        }
    }
    if theta <= SNAP_TOL {
        return Err(FlowError::DegenerateStep(theta));
    }
    Ok(theta)
}

/// Applies `x += θ f`; returns `Σ_forward c_e θ f_e`.
pub fn augment(net: &FlowNetwork, x: &mut [f64], f: &AugmentingStructure, theta: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    for (e, r) in f.edge_rates() {
        x[e] = snap(x[e] + theta * r, net.edge(e).capacity);
    }
    f.arcs.iter().filter(|(a, _)| a.dir == Direction::Forward).map(|(a, m)| a.cost * theta * m).sum()
}

pub(crate) fn snap(v: f64, cap: f64) -> f64 {
    let tol = SNAP_TOL * (1.0 + v.abs());
    if v.abs() <= tol {
        0.0
    } else if cap.is_finite() && (v - cap).abs() <= SNAP_TOL * (1.0 + cap) {
        cap
    } else {
        v
    }
}
