use std::collections::HashSet;

use super::FlowError;

pub type VertexId = usize;
pub type EdgeId = usize;

/// The sink is always vertex 0.
pub const SINK: VertexId = 0;

/// Upper limit on the automatically derived dummy cost; see [`dummy_cost_formula`].
pub const DUMMY_COST_CAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Sink,
    Internal,
    Source,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeSpec {
    /// `f64::INFINITY` for uncapacitated edges.
    pub capacity: f64,
    pub cost: f64,
    pub gain: f64,
}

impl EdgeSpec {
    pub fn new(capacity: f64, cost: f64, gain: f64) -> Self {
        EdgeSpec { capacity, cost, gain }
    }

    pub fn uncapacitated(cost: f64, gain: f64) -> Self {
        EdgeSpec { capacity: f64::INFINITY, cost, gain }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub capacity: f64,
    pub cost: f64,
    pub gain: f64,
    pub dummy: bool,
}

/// `1 + n_max · c_max · max(1, γ_max^|V|)`, capped at [`DUMMY_COST_CAP`].
pub fn dummy_cost_formula(n_max: usize, max_cost: f64, max_gain: f64, num_vertices: usize) -> f64 {
    let growth = if max_gain > 1.0 { max_gain.powf(num_vertices as f64) } else { 1.0 };
    let b = 1.0 + n_max as f64 * max_cost * growth;
    if b.is_finite() {
        b.min(DUMMY_COST_CAP)
    } else {
        DUMMY_COST_CAP
    }
}

/// Generalized flow network with a single sink and dummy edges.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    kinds: Vec<VertexKind>,
    labels: Vec<String>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    dummy_of: Vec<Option<EdgeId>>,
    real_pairs: HashSet<(VertexId, VertexId)>,
    dummy_cost: f64,
}

impl FlowNetwork {
    pub fn new(dummy_cost: f64) -> Self {
        assert!(dummy_cost > 0.0 && dummy_cost.is_finite(), "dummy cost must be positive and finite");
        FlowNetwork {
            kinds: vec![VertexKind::Sink],
            labels: vec!["tau".into()],
            edges: Vec::new(),
            out_edges: vec![Vec::new()],
            in_edges: vec![Vec::new()],
            dummy_of: vec![None],
            real_pairs: HashSet::new(),
            dummy_cost,
        }
    }

    pub fn sink(&self) -> VertexId {
        SINK
    }

    pub fn dummy_cost(&self) -> f64 {
        self.dummy_cost
    }

    /// Raises the cost of every dummy edge (present and future) to at least `b`.
    pub fn raise_dummy_cost(&mut self, b: f64) {
        if !(b > self.dummy_cost) || !b.is_finite() {
            return;
        }
        self.dummy_cost = b;
        for e in &mut self.edges {
            if e.dummy {
                e.cost = b;
            }
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.kinds.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn kind(&self, v: VertexId) -> VertexKind {
        self.kinds[v]
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn dummy_edge(&self, v: VertexId) -> Option<EdgeId> {
        self.dummy_of[v]
    }

    pub fn sources(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.kinds.len()).filter(|&v| self.kinds[v] == VertexKind::Source)
    }

    pub fn add_vertex(&mut self, label: impl Into<String>) -> VertexId {
        self.push_vertex(VertexKind::Internal, label.into())
    }

    /// Adds a source together with its out-edges.
    pub fn add_source(&mut self, label: impl Into<String>, out: &[(VertexId, EdgeSpec)]) -> Result<VertexId, FlowError> {
        for &(to, spec) in out {
            self.check_edge(usize::MAX, to, spec)?;
        }
        let s = self.push_vertex(VertexKind::Source, label.into());
        for &(to, spec) in out {
            self.add_edge(s, to, spec)?;
        }
        Ok(s)
    }

    pub fn add_edge(&mut self, from: VertexId, to: VertexId, spec: EdgeSpec) -> Result<EdgeId, FlowError> {
        self.check_edge(from, to, spec)?;
        if self.real_pairs.contains(&(to, from)) {
            return Err(FlowError::AntiParallel { from, to });
        }
        self.real_pairs.insert((from, to));
        Ok(self.push_edge(Edge { from, to, capacity: spec.capacity, cost: spec.cost, gain: spec.gain, dummy: false }))
    }

    fn check_edge(&self, from: VertexId, to: VertexId, spec: EdgeSpec) -> Result<(), FlowError> {
        let n = self.kinds.len();
        if to >= n || (from != usize::MAX && from >= n) {
            return Err(FlowError::InvalidEdge(format!("unknown endpoint in {from}->{to}")));
        }
        if from == to {
            return Err(FlowError::InvalidEdge(format!("self loop at {from}")));
        }
        if from != usize::MAX && self.kinds[from] == VertexKind::Sink {
            return Err(FlowError::InvalidEdge("the sink has no outgoing edges".into()));
        }
        if self.kinds[to] == VertexKind::Source {
            return Err(FlowError::InvalidEdge(format!("source {to} cannot have incoming edges")));
        }
        if !(spec.capacity > 0.0) || !(spec.cost >= 0.0) || !spec.cost.is_finite() || !(spec.gain > 0.0) || !spec.gain.is_finite() {
            return Err(FlowError::InvalidEdge(format!("bad parameters {spec:?}")));
        }
        Ok(())
    }

    fn push_vertex(&mut self, kind: VertexKind, label: String) -> VertexId {
        let v = self.kinds.len();
        self.kinds.push(kind);
        self.labels.push(label);
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        self.dummy_of.push(None);
        let e = self.push_edge(Edge { from: v, to: SINK, capacity: f64::INFINITY, cost: self.dummy_cost, gain: 1.0, dummy: true });
        self.dummy_of[v] = Some(e);
        v
    }

    fn push_edge(&mut self, edge: Edge) -> EdgeId {
        let e = self.edges.len();
        self.out_edges[edge.from].push(e);
        self.in_edges[edge.to].push(e);
        self.edges.push(edge);
        e
    }

    /// Copy of the network with every finite capacity multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> FlowNetwork {
        let mut net = self.clone();
        for e in &mut net.edges {
            if e.capacity.is_finite() {
                e.capacity *= scale;
            }
        }
        net
    }

    /// Net out-flow `Σ_out x − Σ_in γ x` at `v`.
    pub fn net_outflow(&self, x: &[f64], v: VertexId) -> f64 {
        let out: f64 = self.out_edges[v].iter().map(|&e| x[e]).sum();
        let inc: f64 = self.in_edges[v].iter().map(|&e| self.edges[e].gain * x[e]).sum();
        out - inc
    }

    /// Largest conservation error over all vertices except the sink; arrived
    /// sources must emit exactly one unit.
    pub fn conservation_error(&self, x: &[f64]) -> f64 {
        (1..self.num_vertices())
            .map(|v| {
                let target = if self.kinds[v] == VertexKind::Source { 1.0 } else { 0.0 };
                (self.net_outflow(x, v) - target).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn flow_cost(&self, x: &[f64]) -> f64 {
        self.edges.iter().zip(x).map(|(e, v)| e.cost * v).sum()
    }

    pub fn dummy_flow(&self, x: &[f64]) -> f64 {
        self.edges.iter().zip(x).filter(|(e, _)| e.dummy).map(|(_, v)| *v).sum()
    }

    /// Line-record snapshot of vertices and edges with the given flow.
    pub fn snapshot(&self, x: &[f64]) -> String {
        let mut out = String::new();
        for v in 0..self.num_vertices() {
            let kind = match self.kinds[v] {
                VertexKind::Sink => "sink",
                VertexKind::Internal => "internal",
                VertexKind::Source => "source",
            };
            out.push_str(&serde_json::json!({"vertex": v, "kind": kind, "label": self.labels[v]}).to_string());
            out.push('\n');
        }
        for (k, e) in self.edges.iter().enumerate() {
            let cap = if e.capacity.is_finite() { serde_json::json!(e.capacity) } else { serde_json::Value::Null };
            let rec = serde_json::json!({
                "edge": k, "from": e.from, "to": e.to, "capacity": cap, "cost": e.cost,
                "gain": e.gain, "dummy": e.dummy, "flow": x.get(k).copied().unwrap_or(0.0),
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }
}
