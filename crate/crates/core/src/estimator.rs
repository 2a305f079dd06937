//! Residual a posteriori error estimators.
//!
//! ```text
//! η_u² = Σ_T h_T²‖r_u‖²_T + Σ_{e int} ∫_e h_e[∂²u_h/∂n²]² + h_e⁻¹[∇u_h]²
//!      + Σ_{e bdry} ∫_e h_e (∂²u_h/∂n² - g_e)²
//! ```
//!
//! with `r_u = f + q_h`, `g_e = 0` for distributed control and `r_u = f`,
//! `g_e = q_h` for boundary control. `η_φ` uses `r_φ = u_h - u_d`, `g_e = 0`.
//! All contributions below are stored squared.

use crate::control::ControlKind;
use crate::error::{Error, Result};
use crate::kkt::{Discretization, LOAD_DEGREE};
use crate::p2::{self, ElementGeometry, P2Function};
use crate::quadrature;
use crate::study::TrueErrors;

/// Squared indicator contributions of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEstimate {
    /// `h_T²‖r‖²_T` per triangle.
    pub element: Vec<f64>,
    /// `h_e ∫_e [∂²v/∂n²]²` per edge, zero on boundary edges.
    pub hessian_jump: Vec<f64>,
    /// `h_e⁻¹ ∫_e [∇v]²` per edge, zero on boundary edges.
    pub gradient_jump: Vec<f64>,
    /// `h_e ∫_e (∂²v/∂n² - g)²` per edge, zero on interior edges.
    pub boundary: Vec<f64>,
}

impl FieldEstimate {
    pub fn total_squared(&self) -> f64 {
        self.element.iter().chain(&self.hessian_jump).chain(&self.gradient_jump).chain(&self.boundary).sum()
    }

    pub fn total(&self) -> f64 {
        self.total_squared().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub u: FieldEstimate,
    pub phi: FieldEstimate,
    /// `‖B_hφ_h - Π_hB_hφ_h‖²` per control entity.
    pub control: Vec<f64>,
    pub eta_u: f64,
    pub eta_phi: f64,
    pub eta_control: f64,
    pub eta_total: f64,
    /// Element terms plus half of each adjacent interior-edge term plus the
    /// full term of each boundary edge, per triangle.
    pub aggregate: Vec<f64>,
}

/// Volume term of one triangle: `h_T² ∫_T r²`.
fn element_term(geo: &ElementGeometry, rule: &quadrature::QuadratureRule, r: impl Fn([f64; 2], [f64; 3]) -> f64) -> f64 {
    let mut s = 0.0;
    for (xi, w) in rule.iter() {
        let v = r(geo.map(xi), p2::barycentric_from_reference(xi));
        s += 2.0 * geo.area * w * v * v;
    }
    let h = geo.diameter();
    h * h * s
}

fn edge_terms(disc: &Discretization, v: &P2Function, boundary_offset: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let ne = disc.mesh.n_edges();
    let (mut hj, mut gj, mut bd) = (vec![0.0; ne], vec![0.0; ne], vec![0.0; ne]);
    for tr in &disc.traces.traces {
        let h = tr.length;
        if tr.is_interior() {
            let s = tr.second_jump_of(&v.coeffs);
            hj[tr.edge] = h * h * s * s;
            gj[tr.edge] = tr.jump_squared(&v.coeffs) / h;
        } else {
            let r = tr.mean_of(&v.coeffs) - boundary_offset(tr.edge);
            bd[tr.edge] = h * h * r * r;
        }
    }
    (hj, gj, bd)
}

/// `‖B_hφ - Π_hB_hφ‖²` per control entity.
pub fn control_term(disc: &Discretization, phi: &P2Function) -> Vec<f64> {
    let trace = disc.trace(phi);
    match disc.spec.kind {
        ControlKind::Distributed => {
            let rule = quadrature::triangle(4);
            disc.space
                .measures
                .iter()
                .enumerate()
                .map(|(k, &area)| {
                    rule.iter()
                        .map(|(xi, w)| {
                            let d = trace.eval(k, p2::barycentric_from_reference(xi)) - trace.mean[k];
                            2.0 * area * w * d * d
                        })
                        .sum::<f64>()
                })
                .collect()
        }
        ControlKind::Boundary => (0..disc.space.len())
            .map(|k| {
                // linear along the edge with mean `trace.mean[k]`
                let a = trace.eval(k, [0.0; 3]);
                let b = trace.eval(k, [1.0, 0.0, 0.0]);
                disc.space.measures[k] * (b - a) * (b - a) / 12.0
            })
            .collect(),
    }
}

/// Evaluate all indicators for a discrete state `u`, adjoint `phi` and
/// piecewise constant control values `q` (one per control entity).
pub fn estimate(disc: &Discretization, u: &P2Function, phi: &P2Function, q: &[f64]) -> EstimatorReport {
    let mesh = &disc.mesh;
    let spec = &disc.spec;
    let rule = quadrature::triangle(LOAD_DEGREE);
    let nt = mesh.n_triangles();
    let mut element_u = Vec::with_capacity(nt);
    let mut element_phi = Vec::with_capacity(nt);
    for t in 0..nt {
        let geo = ElementGeometry::new(mesh, t);
        let qt = match spec.kind {
            ControlKind::Distributed => q[t],
            ControlKind::Boundary => 0.0,
        };
        element_u.push(element_term(&geo, &rule, |x, _| (spec.f)(x) + qt));
        element_phi.push(element_term(&geo, &rule, |x, lam| u.value_at(&disc.dofs, t, lam) - (spec.u_d)(x)));
    }

    let mut edge_q = vec![0.0; mesh.n_edges()];
    if spec.kind == ControlKind::Boundary {
        for (k, &e) in disc.space.entities.iter().enumerate() {
            edge_q[e] = q[k];
        }
    }
    let (hj_u, gj_u, bd_u) = edge_terms(disc, u, |e| edge_q[e]);
    let (hj_p, gj_p, bd_p) = edge_terms(disc, phi, |_| 0.0);
    let fu = FieldEstimate {
        element: element_u,
        hessian_jump: hj_u,
        gradient_jump: gj_u,
        boundary: bd_u,
    };
    let fp = FieldEstimate {
        element: element_phi,
        hessian_jump: hj_p,
        gradient_jump: gj_p,
        boundary: bd_p,
    };

    let mut aggregate: Vec<f64> = (0..nt).map(|t| fu.element[t] + fp.element[t]).collect();
    for (e, edge) in mesh.edges.iter().enumerate() {
        let interior = fu.hessian_jump[e] + fu.gradient_jump[e] + fp.hessian_jump[e] + fp.gradient_jump[e];
        let boundary = fu.boundary[e] + fp.boundary[e];
        match edge.triangles {
            (a, Some(b)) => {
                aggregate[a] += 0.5 * interior;
                aggregate[b] += 0.5 * interior;
            }
            (a, None) => aggregate[a] += boundary,
        }
    }

    let control = control_term(disc, phi);
    let eta_u = fu.total();
    let eta_phi = fp.total();
    let eta_control = control.iter().sum::<f64>().sqrt();
    EstimatorReport {
        eta_total: (eta_u * eta_u + eta_phi * eta_phi + eta_control * eta_control).sqrt(),
        u: fu,
        phi: fp,
        control,
        eta_u,
        eta_phi,
        eta_control,
        aggregate,
    }
}

/// `η_total / (‖u - u_h‖_h + ‖φ - φ_h‖_h + ‖q - q_h‖)`.
pub fn efficiency_index(report: &EstimatorReport, errors: &TrueErrors) -> Result<f64> {
    let denom = errors.sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroError);
    }
    Ok(report.eta_total / denom)
}
