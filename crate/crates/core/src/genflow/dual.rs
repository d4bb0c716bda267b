use super::network::{FlowNetwork, VertexKind, SINK};
use super::FlowError;

const CERT_TOL: f64 = 1e-6;

/// Dual solution built from final heights for the LP with capacities μ/(1+ε).
#[derive(Clone, Debug, PartialEq)]
pub struct DualReport {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `Σ_t y_{s_t} − Σ_e μ_e z_e / (1+ε)`.
    pub objective: f64,
    pub source_height_sum: f64,
    /// `(1+ε)/ε`, so that `Σ_t y_{s_t} ≤ bound_factor · C*` by weak duality.
    pub bound_factor: f64,
    /// `objective ≥ ε/(1+ε) · Σ_t y_{s_t}` within tolerance.
    pub meets_fraction: bool,
}

pub fn dual_certificate(net: &FlowNetwork, x: &[f64], heights: &[f64], eps: f64) -> Result<DualReport, FlowError> {
    let mut y = heights.to_vec();
    let mut violations = Vec::new();
    if y[SINK].abs() > CERT_TOL {
        violations.push(format!("sink height {} is not zero", y[SINK]));
    }
    y[SINK] = 0.0;
    let mut z = vec![0.0; net.num_edges()];
    let mut penalty = 0.0;
    for (k, e) in net.edges().iter().enumerate() {
        let (yu, yv) = (y[e.from], y[e.to]);
        let slack = yu - e.gain * yv - e.cost;
        z[k] = if slack > CERT_TOL { slack } else { 0.0 };
        if x[k] < e.capacity && slack > CERT_TOL {
            violations.push(format!("unsaturated edge {k}: y_u = {yu} > γ y_v + c = {}", e.gain * yv + e.cost));
        }
        if x[k] > 0.0 && e.gain * yv > yu + CERT_TOL {
            violations.push(format!("edge {k} with flow: y_v = {yv} > y_u/γ = {}", yu / e.gain));
        }
        if z[k] > 0.0 {
            if e.capacity.is_infinite() {
                violations.push(format!("edge {k} is uncapacitated but z = {}", z[k]));
            } else {
                penalty += e.capacity * z[k];
            }
        }
    }
    if !violations.is_empty() {
        return Err(FlowError::CertificateViolation(violations));
    }
    let source_height_sum: f64 = (1..net.num_vertices()).filter(|&v| net.kind(v) == VertexKind::Source).map(|v| y[v]).sum();
    let objective = source_height_sum - penalty / (1.0 + eps);
    let meets_fraction = objective >= eps / (1.0 + eps) * source_height_sum - CERT_TOL;
    Ok(DualReport { y, z, objective, source_height_sum, bound_factor: (1.0 + eps) / eps, meets_fraction })
}
