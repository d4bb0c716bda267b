use super::dual::{dual_certificate, DualReport};
use super::network::{EdgeId, EdgeSpec, FlowNetwork, VertexId};
use super::residual::{augment, max_step, residual, snap, Direction, SNAP_TOL};
use super::{cheapest_in_residual, lp_route, policy, FlowError, Solver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Repeated cheapest-structure augmentation until the unit is routed.
    #[default]
    Faithful,
    /// One residual min-cost LP per arrival.
    OneShot,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowWarning {
    /// Dummy edges carry flow after the step.
    DummyUsed { flow: f64 },
    /// The loop stalled or hit its iteration cap and finished with the LP.
    OneShotFallback { reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub source: VertexId,
    /// `Σ c_e (x_e^(t) − x_e^(t−1))_+`.
    pub cost: f64,
    /// `Σ c_e |x_e^(t) − x_e^(t−1)|`.
    pub symmetric_cost: f64,
    pub iterations: usize,
    /// Height of the new source in the residual graph after the step.
    pub height_after: f64,
    pub warnings: Vec<FlowWarning>,
}

/// A replay session: network, current flow and per-step log.
#[derive(Clone, Debug)]
pub struct OnlineFlow {
    net: FlowNetwork,
    x: Vec<f64>,
    pub solver: Solver,
    pub mode: Mode,
    log: Vec<StepRecord>,
}

impl OnlineFlow {
    pub fn new(net: FlowNetwork) -> Self {
        let x = vec![0.0; net.num_edges()];
        OnlineFlow { net, x, solver: Solver::Policy, mode: Mode::Faithful, log: Vec::new() }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn net(&self) -> &FlowNetwork {
        &self.net
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }

    pub fn total_cost(&self) -> f64 {
        self.log.iter().map(|r| r.cost).sum()
    }

    pub fn add_vertex(&mut self, label: impl Into<String>) -> VertexId {
        let v = self.net.add_vertex(label);
        self.x.resize(self.net.num_edges(), 0.0);
        v
    }

    pub fn add_edge(&mut self, from: VertexId, to: VertexId, spec: EdgeSpec) -> Result<EdgeId, FlowError> {
        let e = self.net.add_edge(from, to, spec)?;
        self.x.resize(self.net.num_edges(), 0.0);
        Ok(e)
    }

    pub fn raise_dummy_cost(&mut self, b: f64) {
        self.net.raise_dummy_cost(b);
    }

    pub fn heights(&self) -> Result<Vec<f64>, FlowError> {
        super::heights(&self.net, &self.x)
    }

    pub fn dual_certificate(&self, eps: f64) -> Result<DualReport, FlowError> {
        let y = self.heights()?;
        dual_certificate(&self.net, &self.x, &y, eps)
    }

    pub fn snapshot(&self) -> String {
        self.net.snapshot(&self.x)
    }

    /// Adds a source with its out-edges and routes one unit from it.
    pub fn arrive_source(&mut self, label: impl Into<String>, out: &[(VertexId, EdgeSpec)]) -> Result<StepRecord, FlowError> {
        let s = self.net.add_source(label, out)?;
        self.x.resize(self.net.num_edges(), 0.0);
        let before = self.x.clone();
        let mut warnings = Vec::new();
        let mut iterations = 0;
        match self.mode {
            Mode::OneShot => self.one_shot(s)?,
            Mode::Faithful => {
                let cap = 10 * self.net.num_edges();
                loop {
                    let remaining = 1.0 - self.sent(s);
                    if remaining <= SNAP_TOL {
                        break;
                    }
                    if iterations >= cap {
                        warnings.push(FlowWarning::OneShotFallback { reason: format!("iteration cap {cap} reached") });
                        self.one_shot(s)?;
                        break;
                    }
                    let res = residual(&self.net, &self.x)?;
                    let f = cheapest_in_residual(self.net.num_vertices(), &res, s, self.solver)?;
                    match max_step(&self.net, &self.x, &f, remaining) {
                        Ok(theta) => {
                            augment(&self.net, &mut self.x, &f, theta);
                            iterations += 1;
                        }
                        Err(FlowError::DegenerateStep(theta)) => {
                            warnings.push(FlowWarning::OneShotFallback { reason: format!("degenerate step {theta:e}") });
                            self.one_shot(s)?;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        let mut cost = 0.0;
        let mut symmetric_cost = 0.0;
        for (k, e) in self.net.edges().iter().enumerate() {
            let d = self.x[k] - before[k];
            cost += e.cost * d.max(0.0);
            symmetric_cost += e.cost * d.abs();
        }
        let dummy = self.net.dummy_flow(&self.x);
        if dummy > 1e-9 {
            warnings.push(FlowWarning::DummyUsed { flow: dummy });
        }
        let res = residual(&self.net, &self.x)?;
        let height_after = policy::solve(self.net.num_vertices(), &res).heights[s];
        let rec = StepRecord { source: s, cost, symmetric_cost, iterations, height_after, warnings };
        self.log.push(rec.clone());
        Ok(rec)
    }

    fn sent(&self, s: VertexId) -> f64 {
        self.net.out_edges(s).iter().map(|&e| self.x[e]).sum()
    }

    /// Sends the rest of the source's unit with one capacitated residual LP.
    fn one_shot(&mut self, s: VertexId) -> Result<(), FlowError> {
        let remaining = 1.0 - self.sent(s);
        if remaining <= SNAP_TOL {
            return Ok(());
        }
        let res = residual(&self.net, &self.x)?;
        let (f, _) = lp_route::min_cost_residual_flow(self.net.num_vertices(), &res, s, remaining, true)?;
        for (r, v) in res.iter().zip(f) {
            if v == 0.0 {
                continue;
            }
            let delta = match r.dir {
                Direction::Forward => v,
                Direction::Backward => -v * r.gain,
            };
            let cap = self.net.edge(r.edge).capacity;
            self.x[r.edge] = snap((self.x[r.edge] + delta).clamp(0.0, cap), cap);
        }
        Ok(())
    }
}
