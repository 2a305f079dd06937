//! Piecewise constant controls, the control operator `B_h`, the
//! L2 projection `Π_h` onto piecewise constants and the box clamp.
//!
//! Distributed controls live on triangles and `B_h` is the identity; boundary
//! controls live on boundary edges and `B_h v|_e` is the outward normal
//! derivative of `v` taken from the single triangle adjacent to `e`.

use crate::c0ip::{EdgeTraceCache, EDGE_POINTS};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::p2::{self, DofMap, ElementGeometry, P2Function};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    /// Control on `Ω`, acting through `(q, v)`.
    Distributed,
    /// Control on `Γ`, acting through `⟨q, ∂v/∂n⟩`.
    Boundary,
}

/// Box constraints `lower <= q <= upper`; infinite values mean no constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::BadBounds { lower, upper });
        }
        Ok(Bounds { lower, upper })
    }

    pub fn unbounded() -> Self {
        Bounds {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    /// `min(upper, max(lower, x))`, skipping infinite bounds.
    pub fn clamp(&self, x: f64) -> f64 {
        let mut y = x;
        if self.lower.is_finite() && y < self.lower {
            y = self.lower;
        }
        if self.upper.is_finite() && y > self.upper {
            y = self.upper;
        }
        y
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Control entities of a mesh with the coupling `∫_entity B_h ψ_i` for every
/// P2 basis function.
#[derive(Debug, Clone)]
pub struct ControlSpace {
    pub kind: ControlKind,
    /// Triangle indices (distributed) or edge indices (boundary).
    pub entities: Vec<usize>,
    /// Triangle areas or edge lengths.
    pub measures: Vec<f64>,
    /// Per entity: `(dof, ∫_entity B_h ψ_dof)` for every dof with a nonzero
    /// or structurally present contribution.
    pub coupling: Vec<Vec<(usize, f64)>>,
}

impl ControlSpace {
    pub fn new(kind: ControlKind, mesh: &Mesh, dofs: &DofMap, traces: &EdgeTraceCache) -> Self {
        match kind {
            ControlKind::Distributed => {
                let entities: Vec<usize> = (0..mesh.n_triangles()).collect();
                let measures: Vec<f64> = entities.iter().map(|&t| mesh.area(t)).collect();
                // ∫_T vertex shape = 0, ∫_T midpoint shape = |T|/3
                let coupling = entities
                    .iter()
                    .zip(&measures)
                    .map(|(&t, &a)| dofs.cells[t][3..].iter().map(|&d| (d, a / 3.0)).collect())
                    .collect();
                ControlSpace {
                    kind,
                    entities,
                    measures,
                    coupling,
                }
            }
            ControlKind::Boundary => {
                let entities: Vec<usize> = mesh.boundary_edges().collect();
                let measures: Vec<f64> = entities.iter().map(|&e| mesh.edge_length(e)).collect();
                let coupling = entities
                    .iter()
                    .map(|&e| {
                        let tr = &traces.traces[e];
                        tr.dofs
                            .iter()
                            .zip(&tr.jump)
                            .map(|(&d, j)| (d, (0..EDGE_POINTS).map(|g| tr.weights[g] * j[g]).sum()))
                            .collect()
                    })
                    .collect();
                ControlSpace {
                    kind,
                    entities,
                    measures,
                    coupling,
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// `⟨q, B_h ψ_i⟩` for every dof (full length).
    pub fn load(&self, n_dofs: usize, q: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; n_dofs];
        for (row, &qk) in self.coupling.iter().zip(q) {
            for &(d, c) in row {
                b[d] += c * qk;
            }
        }
        b
    }

    /// `Π_h B_h v`: entity-wise mean of `B_h v`.
    pub fn project_trace(&self, v: &[f64]) -> Vec<f64> {
        self.coupling
            .iter()
            .zip(&self.measures)
            .map(|(row, m)| row.iter().map(|&(d, c)| c * v[d]).sum::<f64>() / m)
            .collect()
    }

    /// `⟨p, q⟩` in the control space for piecewise constants.
    pub fn inner(&self, p: &[f64], q: &[f64]) -> f64 {
        self.measures.iter().zip(p.iter().zip(q)).map(|(m, (a, b))| m * a * b).sum()
    }
}

/// Piecewise constant control values with their bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    pub kind: ControlKind,
    pub values: Vec<f64>,
    pub bounds: Bounds,
}

impl ControlField {
    pub fn constant(space: &ControlSpace, value: f64, bounds: Bounds) -> Self {
        ControlField {
            kind: space.kind,
            values: vec![value; space.len()],
            bounds,
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.values.iter().all(|&v| self.bounds.contains(v))
    }
}

/// Per-entity representation of `B_h v`.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceData {
    /// The six local P2 coefficients of `v` on each triangle.
    Quadratic(Vec<[f64; 6]>),
    /// Values of the (linear) normal derivative at the two endpoints of each
    /// boundary edge, in the order of the edge's vertices.
    Linear(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceField {
    pub data: TraceData,
    /// `Π_h B_h v` per entity.
    pub mean: Vec<f64>,
}

impl TraceField {
    /// Evaluate on an entity: barycentric coordinates for triangles, the edge
    /// parameter `s ∈ [0, 1]` in `local[0]` for edges.
    pub fn eval(&self, entity: usize, local: [f64; 3]) -> f64 {
        match &self.data {
            TraceData::Quadratic(c) => p2::shape_values(local).iter().zip(&c[entity]).map(|(s, v)| s * v).sum(),
            TraceData::Linear(v) => {
                let [a, b] = v[entity];
                a + local[0] * (b - a)
            }
        }
    }
}

/// Apply `B_h` to a P2 function.
pub fn bh_apply(space: &ControlSpace, mesh: &Mesh, dofs: &DofMap, v: &P2Function) -> TraceField {
    let mean = pi_h_of(space, &v.coeffs);
    let data = match space.kind {
        ControlKind::Distributed => TraceData::Quadratic(space.entities.iter().map(|&t| v.local(dofs, t)).collect()),
        ControlKind::Boundary => TraceData::Linear(
            space
                .entities
                .iter()
                .map(|&e| {
                    let edge = &mesh.edges[e];
                    let t = edge.triangles.0;
                    let geo = ElementGeometry::new(mesh, t);
                    let n = outward_normal(mesh, e);
                    edge.vertices.map(|vtx| {
                        let g = v.gradient_at(dofs, &geo, t, geo.barycentric(mesh.vertices[vtx]));
                        g[0] * n[0] + g[1] * n[1]
                    })
                })
                .collect(),
        ),
    };
    TraceField { data, mean }
}

fn pi_h_of(space: &ControlSpace, coeffs: &[f64]) -> Vec<f64> {
    space.project_trace(coeffs)
}

/// Outward unit normal of a boundary edge.
pub fn outward_normal(mesh: &Mesh, e: usize) -> [f64; 2] {
    let edge = &mesh.edges[e];
    let [a, b] = edge.vertices;
    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
    let l = crate::mesh::dist(pa, pb);
    let n = [(pb[1] - pa[1]) / l, -(pb[0] - pa[0]) / l];
    let c = mesh.centroid(edge.triangles.0);
    if n[0] * (pa[0] - c[0]) + n[1] * (pa[1] - c[1]) < 0.0 {
        [-n[0], -n[1]]
    } else {
        n
    }
}

/// `Π_h` of a trace: its entity-wise mean.
pub fn pi_h(trace: &TraceField) -> Vec<f64> {
    trace.mean.clone()
}

/// `Π_h g` for a pointwise-evaluable `g`, by quadrature of the given degree.
pub fn pi_h_callable(space: &ControlSpace, mesh: &Mesh, g: impl Fn(Point) -> f64, degree: usize) -> Vec<f64> {
    match space.kind {
        ControlKind::Distributed => {
            let rule = quadrature::triangle(degree);
            space
                .entities
                .iter()
                .map(|&t| {
                    let geo = ElementGeometry::new(mesh, t);
                    rule.iter().map(|(xi, w)| 2.0 * w * g(geo.map(xi))).sum()
                })
                .collect()
        }
        ControlKind::Boundary => {
            let rule = quadrature::edge(degree);
            space
                .entities
                .iter()
                .map(|&e| {
                    let [a, b] = mesh.edges[e].vertices;
                    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                    rule.iter()
                        .map(|(s, w)| w * g([pa[0] + s[0] * (pb[0] - pa[0]), pa[1] + s[0] * (pb[1] - pa[1])]))
                        .sum()
                })
                .collect()
        }
    }
}

/// Entity-wise `min(upper, max(lower, -d/α))`.
pub fn clamp_field(kind: ControlKind, d: &[f64], alpha: f64, bounds: Bounds) -> Result<ControlField> {
    if !(alpha > 0.0) {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(ControlField {
        kind,
        values: d.iter().map(|&x| bounds.clamp(-x / alpha)).collect(),
        bounds,
    })
}

/// Status of the first-order conditions on one control entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityStatus {
    AtLower,
    AtUpper,
    Inactive,
}

#[derive(Debug, Clone)]
pub struct KktReport {
    pub status: Vec<EntityStatus>,
    /// Multiplier `m = Π_h B_h φ_h + α q_h` per entity.
    pub multiplier: Vec<f64>,
    /// Entities whose sign condition fails.
    pub violations: Vec<usize>,
    /// `⟨B_h φ_h + α q_h, p - q_h⟩` for `p ≡ lower`, when finite.
    pub vi_at_lower: Option<f64>,
    /// Same for `p ≡ upper`.
    pub vi_at_upper: Option<f64>,
}

impl KktReport {
    pub fn satisfied(&self) -> bool {
        self.violations.is_empty()
            && self.vi_at_lower.map_or(true, |v| v >= -1e-10)
            && self.vi_at_upper.map_or(true, |v| v >= -1e-10)
    }
}

/// Absolute multiplier tolerance on inactive entities.
pub const KKT_TOLERANCE: f64 = 1e-10;

/// Check the discrete variational inequality for piecewise constant `q`,
/// whose trace projection is `trace.mean`.
pub fn vi_residual(space: &ControlSpace, q: &ControlField, trace: &TraceField, alpha: f64) -> KktReport {
    vi_residual_with_tolerance(space, q, trace, alpha, KKT_TOLERANCE)
}

pub fn vi_residual_with_tolerance(
    space: &ControlSpace,
    q: &ControlField,
    trace: &TraceField,
    alpha: f64,
    tol: f64,
) -> KktReport {
    let b = q.bounds;
    let multiplier: Vec<f64> = trace.mean.iter().zip(&q.values).map(|(d, qv)| d + alpha * qv).collect();
    let mut status = Vec::with_capacity(q.values.len());
    let mut violations = Vec::new();
    for (k, (&qv, &m)) in q.values.iter().zip(&multiplier).enumerate() {
        // scale the tolerance with the size of the terms being cancelled
        let scale = 1.0 + trace.mean[k].abs();
        let (s, ok) = if qv == b.lower {
            (EntityStatus::AtLower, m >= -tol * scale)
        } else if qv == b.upper {
            (EntityStatus::AtUpper, m <= tol * scale)
        } else {
            (EntityStatus::Inactive, m.abs() <= tol * scale && b.contains(qv))
        };
        status.push(s);
        if !ok {
            violations.push(k);
        }
    }
    let vi = |p: f64| {
        p.is_finite().then(|| {
            multiplier
                .iter()
                .zip(&q.values)
                .zip(&space.measures)
                .map(|((m, qv), meas)| meas * m * (p - qv))
                .sum()
        })
    };
    KktReport {
        status,
        multiplier: multiplier.clone(),
        violations,
        vi_at_lower: vi(b.lower),
        vi_at_upper: vi(b.upper),
    }
}

/// `⟨B_h φ + α q, p - q⟩` for an arbitrary piecewise constant `p`.
pub fn vi_value(space: &ControlSpace, q: &[f64], trace_mean: &[f64], alpha: f64, p: &[f64]) -> f64 {
    (0..q.len())
        .map(|k| space.measures[k] * (trace_mean[k] + alpha * q[k]) * (p[k] - q[k]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_lshape, make_unit_square, Diagonal, Domain};
    use crate::p2::interpolate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn space(kind: ControlKind, n: usize) -> (Mesh, DofMap, ControlSpace) {
        let m = make_unit_square(n, Diagonal::Ne).unwrap();
        let d = DofMap::new(&m);
        let tr = EdgeTraceCache::new(&m, &d);
        let s = ControlSpace::new(kind, &m, &d, &tr);
        (m, d, s)
    }

    #[test]
    fn clamp_examples() {
        let b = Bounds::new(-750.0, -50.0).unwrap();
        let k = ControlKind::Distributed;
        assert_eq!(clamp_field(k, &[1.0], 1e-3, b).unwrap().values, vec![-750.0]);
        assert_eq!(clamp_field(k, &[1e-4], 1e-3, b).unwrap().values, vec![-50.0]);
        assert!((clamp_field(k, &[0.2], 1e-3, b).unwrap().values[0] + 200.0).abs() < 1e-12);
        assert_eq!(clamp_field(k, &[5.0], 1e-3, Bounds::unbounded()).unwrap().values, vec![-5000.0]);
        assert!(clamp_field(k, &[1.0], 0.0, b).is_err());
        assert!(Bounds::new(1.0, 1.0).is_err());
    }

    #[test]
    fn boundary_trace_matches_analytic_normal_derivative() {
        let (m, d, s) = space(ControlKind::Boundary, 16);
        let g = |p: Point| p[0] * (1.0 - p[0]) * (PI * p[1]).sin();
        let v = interpolate(&m, &d, g, true);
        let tr = bh_apply(&s, &m, &d, &v);
        let TraceData::Linear(vals) = &tr.data else { panic!() };
        for (k, &e) in s.entities.iter().enumerate() {
            let edge = &m.edges[e];
            let (pa, pb) = (m.vertices[edge.vertices[0]], m.vertices[edge.vertices[1]]);
            if pa[0] == 0.0 && pb[0] == 0.0 {
                // on x = 0 the outward derivative is -∂g/∂x = -sin(πy)
                for (i, p) in [pa, pb].iter().enumerate() {
                    assert!((vals[k][i] + (PI * p[1]).sin()).abs() < 0.05, "{} vs {}", vals[k][i], -(PI * p[1]).sin());
                }
            }
        }
    }

    #[test]
    fn zero_and_identity_traces() {
        let (m, d, s) = space(ControlKind::Boundary, 3);
        let tr = bh_apply(&s, &m, &d, &P2Function::zeros(&d));
        assert!(tr.mean.iter().all(|&x| x == 0.0));
        let (m, d, s) = space(ControlKind::Distributed, 3);
        let v = interpolate(&m, &d, |p| p[0] + p[1] * p[1], true);
        let tr = bh_apply(&s, &m, &d, &v);
        let TraceData::Quadratic(c) = &tr.data else { panic!() };
        for (k, &t) in s.entities.iter().enumerate() {
            assert_eq!(c[k], v.local(&d, t));
        }
    }

    #[test]
    fn projection_reproduces_constants_and_means() {
        let (m, d, s) = space(ControlKind::Distributed, 2);
        let c = interpolate(&m, &d, |_| 3.5, false);
        assert!(pi_h(&bh_apply(&s, &m, &d, &c)).iter().all(|&x| (x - 3.5).abs() < 1e-14));

        let m = Mesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            Domain { corners: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] },
        );
        let d = DofMap::new(&m);
        let s = ControlSpace::new(ControlKind::Distributed, &m, &d, &EdgeTraceCache::new(&m, &d));
        let x = interpolate(&m, &d, |p| p[0], false);
        assert!((pi_h(&bh_apply(&s, &m, &d, &x))[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn projection_is_orthogonal_to_piecewise_constants() {
        for kind in [ControlKind::Distributed, ControlKind::Boundary] {
            let m = make_lshape(2, Diagonal::Ne).unwrap();
            let d = DofMap::new(&m);
            let tr = EdgeTraceCache::new(&m, &d);
            let s = ControlSpace::new(kind, &m, &d, &tr);
            let v = interpolate(&m, &d, |p| (p[0] * 2.0).sin() * (p[1] + 1.0).powi(2), true);
            let trace = bh_apply(&s, &m, &d, &v);
            let rule_t = quadrature::triangle(4);
            let rule_e = quadrature::edge(3);
            // ⟨Π_h g - g, p_k⟩ for every indicator p_k, integrating g by an exact rule
            for k in 0..s.len() {
                let integral: f64 = match kind {
                    ControlKind::Distributed => {
                        let geo = ElementGeometry::new(&m, s.entities[k]);
                        rule_t.iter().map(|(xi, w)| 2.0 * geo.area * w * trace.eval(k, p2::barycentric_from_reference(xi))).sum()
                    }
                    ControlKind::Boundary => rule_e.iter().map(|(x, w)| s.measures[k] * w * trace.eval(k, [x[0], 0.0, 0.0])).sum(),
                };
                let defect = trace.mean[k] * s.measures[k] - integral;
                assert!(defect.abs() < 1e-12, "{kind:?} entity {k}: {defect}");
            }
            // idempotence on P0 data
            let p0 = pi_h(&trace);
            let again = pi_h_callable(&s, &m, |_| 0.0, 2);
            assert!(again.iter().all(|&x| x == 0.0));
            assert_eq!(pi_h(&TraceField { data: trace.data.clone(), mean: p0.clone() }), p0);
        }
    }

    #[test]
    fn clamped_then_projected_is_admissible() {
        let (m, _, s) = space(ControlKind::Distributed, 4);
        let b = Bounds::new(-750.0, -50.0).unwrap();
        let q = |p: Point| b.clamp(-1000.0 * (7.0 * p[0]).sin() * (3.0 * p[1]).cos());
        let proj = pi_h_callable(&s, &m, q, 8);
        let slack = 1e-12 * 750.0;
        assert!(proj.iter().all(|&x| x >= b.lower - slack && x <= b.upper + slack));
    }

    #[test]
    fn kkt_report_clean_for_clamp_and_flags_violation() {
        let (m, d, s) = space(ControlKind::Distributed, 4);
        let b = Bounds::new(-750.0, -50.0).unwrap();
        let alpha = 1e-3;
        let phi = interpolate(&m, &d, |p| (PI * p[0]).sin() * (PI * p[1]).sin(), true);
        let trace = bh_apply(&s, &m, &d, &phi);
        let q = clamp_field(ControlKind::Distributed, &trace.mean, alpha, b).unwrap();
        let rep = vi_residual(&s, &q, &trace, alpha);
        assert!(rep.satisfied(), "{:?}", rep.violations);
        assert!(rep.status.iter().any(|&s| s == EntityStatus::Inactive));

        let bad = ControlField { values: vec![b.upper; s.len()], ..q.clone() };
        let rep = vi_residual(&s, &bad, &trace, alpha);
        for (k, st) in rep.status.iter().enumerate() {
            assert_eq!(*st, EntityStatus::AtUpper);
            let raw = -trace.mean[k] / alpha;
            if raw < b.upper - 1e-6 {
                assert!(rep.violations.contains(&k));
            }
        }
        assert!(!rep.violations.is_empty());
    }

    #[test]
    fn vi_holds_iff_clamp_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (_, _, s) = space(ControlKind::Boundary, 3);
        let b = Bounds::new(-2.0, 1.0).unwrap();
        let alpha = 0.5;
        for _ in 0..50 {
            let mean: Vec<f64> = (0..s.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let trace = TraceField { data: TraceData::Linear(vec![[0.0; 2]; s.len()]), mean: mean.clone() };
            let q = clamp_field(ControlKind::Boundary, &mean, alpha, b).unwrap();
            // clamp => VI for random admissible p
            for _ in 0..20 {
                let p: Vec<f64> = (0..s.len()).map(|_| rng.random_range(b.lower..b.upper)).collect();
                assert!(vi_value(&s, &q.values, &mean, alpha, &p) >= -1e-12);
            }
            // a non-clamp admissible q breaks the VI for some bound-valued p
            let k = rng.random_range(0..s.len());
            let mut wrong = q.values.clone();
            wrong[k] = if (wrong[k] - b.lower).abs() > 0.5 { b.lower } else { b.upper };
            let mut p = wrong.clone();
            p[k] = q.values[k];
            assert!(vi_value(&s, &wrong, &mean, alpha, &p) < 0.0);
            let rep = vi_residual(&s, &ControlField { values: wrong, ..q.clone() }, &trace, alpha);
            assert!(rep.violations.contains(&k));
        }
    }
}
