//! Discrete optimality system
//!
//! ```text
//! a_h(u_h, v)  = f(v) + ⟨q_h, B_h v⟩        ∀ v ∈ V_h
//! a_h(v, φ_h)  = (u_h - u_d, v)              ∀ v ∈ V_h
//! ⟨B_h φ_h + α q_h, p - q_h⟩ ≥ 0            ∀ p ∈ Q_ad^h
//! ```
//!
//! solved by a primal-dual active set iteration, plus the variant where the
//! control is not discretized and is recovered pointwise from `B_h φ̃_h`.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use log::warn;

use crate::c0ip::{self, Compensated, EdgeTraceCache, Scope, SparseOperator};
use crate::control::{self, Bounds, ControlField, ControlKind, ControlSpace, TraceField};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::p2::{self, DofMap, ElementGeometry, P2Function};
use crate::quadrature;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Triangle rule degree for the data `f`, `u_d`.
pub const LOAD_DEGREE: usize = 6;
/// Triangle rule degree for exact-solution couplings and error norms.
pub const EXACT_DEGREE: usize = 8;
/// Edge rule degree for pointwise boundary controls.
pub const EDGE_EXACT_DEGREE: usize = 9;

/// Data of one optimal control problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ControlKind,
    pub alpha: f64,
    pub bounds: Bounds,
    pub eta: f64,
    pub f: ScalarFn,
    pub u_d: ScalarFn,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", &self.kind)
            .field("alpha", &self.alpha)
            .field("bounds", &self.bounds)
            .field("eta", &self.eta)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::BadAlpha(self.alpha));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::BadPenalty(self.eta));
        }
        Bounds::new(self.bounds.lower, self.bounds.upper)?;
        Ok(())
    }
}

/// Everything assembled once per mesh.
pub struct Discretization {
    pub spec: ProblemSpec,
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub traces: EdgeTraceCache,
    /// `a_h` on free dofs.
    pub a: SparseOperator,
    /// Mass matrix on free dofs.
    pub mass: SparseOperator,
    pub space: ControlSpace,
    /// `f(ψ_i)` on free dofs.
    pub f_load: Vec<f64>,
    /// `(u_d, ψ_i)` on free dofs.
    pub ud_load: Vec<f64>,
    a_factor: Llt<usize, f64>,
}

impl Discretization {
    pub fn new(spec: &ProblemSpec, mesh: &Mesh) -> Result<Self> {
        spec.validate()?;
        let dofs = DofMap::new(mesh);
        let traces = EdgeTraceCache::new(mesh, &dofs);
        let a = c0ip::assemble_a_h_with(mesh, &dofs, &traces, spec.eta, Scope::Free)?;
        let a_factor = a.cholesky(spec.eta)?;
        let mass = c0ip::assemble_mass(mesh, &dofs, Scope::Free);
        let space = ControlSpace::new(spec.kind, mesh, &dofs, &traces);
        let f = spec.f.clone();
        let ud = spec.u_d.clone();
        let f_load = dofs.restrict(&c0ip::load_vector(mesh, &dofs, |p| f(p), LOAD_DEGREE));
        let ud_load = dofs.restrict(&c0ip::load_vector(mesh, &dofs, |p| ud(p), LOAD_DEGREE));
        Ok(Discretization {
            spec: spec.clone(),
            mesh: mesh.clone(),
            dofs,
            traces,
            a,
            mass,
            space,
            f_load,
            ud_load,
            a_factor,
        })
    }

    pub fn n_free(&self) -> usize {
        self.dofs.n_free()
    }

    /// Solve `a_h(w, v) = rhs(v)` on free dofs, with iterative refinement.
    pub fn solve_a(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let solve = |r: &[f64]| {
            let x = self.a_factor.solve(Col::<f64>::from_fn(n, |i| r[i]));
            (0..n).map(|i| x[i]).collect::<Vec<f64>>()
        };
        let residual = |x: &[f64]| {
            let mut acc = Compensated::from(rhs);
            self.a.apply_into(x, -1.0, &mut acc);
            acc.finish()
        };
        let mut x = solve(rhs);
        let mut r = residual(&x);
        let mut rnorm = norm(&r);
        for _ in 0..MAX_REFINEMENT {
            let trial: Vec<f64> = x.iter().zip(solve(&r)).map(|(a, d)| a + d).collect();
            let trial_r = residual(&trial);
            let trial_norm = norm(&trial_r);
            if !(trial_norm < rnorm) {
                break;
            }
            (x, r, rnorm) = (trial, trial_r, trial_norm);
        }
        x
    }

    /// `⟨q, B_h ψ_i⟩` on free dofs.
    pub fn control_load(&self, q: &[f64]) -> Vec<f64> {
        self.dofs.restrict(&self.space.load(self.dofs.n_dofs, q))
    }

    /// `Π_h B_h v` for a free-dof vector.
    pub fn project_trace_free(&self, v_free: &[f64]) -> Vec<f64> {
        self.space.project_trace(&self.dofs.expand(v_free))
    }

    pub fn trace(&self, v: &P2Function) -> TraceField {
        control::bh_apply(&self.space, &self.mesh, &self.dofs, v)
    }

    /// Residual of the state equation relative to the size of its terms,
    /// `‖r‖ / (‖|A||u|‖ + ‖f‖ + ‖⟨q, B_h ψ⟩‖)`.
    pub fn state_residual(&self, u: &[f64], q: &[f64]) -> f64 {
        let cq = self.control_load(q);
        let mut acc = Compensated::from(&vec![0.0; u.len()]);
        for (i, (f, c)) in self.f_load.iter().zip(&cq).enumerate() {
            acc.add(i, -f);
            acc.add(i, -c);
        }
        self.a.apply_into(u, 1.0, &mut acc);
        let r = acc.finish();
        norm(&r) / (norm(&self.a.apply_abs(u)) + norm(&self.f_load) + norm(&cq)).max(f64::MIN_POSITIVE)
    }

    /// Residual of the adjoint equation relative to the size of its terms.
    pub fn adjoint_residual(&self, u: &[f64], phi: &[f64]) -> f64 {
        let mu = self.mass.apply(u);
        let mut acc = Compensated::from(&self.ud_load);
        self.a.apply_into(phi, 1.0, &mut acc);
        self.mass.apply_into(u, -1.0, &mut acc);
        let r = acc.finish();
        norm(&r) / (norm(&self.a.apply_abs(phi)) + norm(&mu) + norm(&self.ud_load)).max(f64::MIN_POSITIVE)
    }

    /// `½‖u - u_d‖² + (α/2)‖q‖²`.
    pub fn objective(&self, u: &P2Function, q: &[f64]) -> f64 {
        let rule = quadrature::triangle(LOAD_DEGREE);
        let mut misfit = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let geo = ElementGeometry::new(&self.mesh, t);
            for (xi, w) in rule.iter() {
                let e = u.value_at(&self.dofs, t, p2::barycentric_from_reference(xi)) - (self.spec.u_d)(geo.map(xi));
                misfit += 2.0 * geo.area * w * e * e;
            }
        }
        0.5 * misfit + 0.5 * self.spec.alpha * self.space.inner(q, q)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Coupling block `G` of the reduced optimality system: `G = (1/α) Σ_{k ∈ I}
/// c_k c_kᵀ / |k|` over the inactive entities, `c_k = (∫_k B_h ψ_i)_i`.
#[derive(Debug, Clone, Default)]
pub struct BlockCoupling {
    pub entries: Vec<Triplet<usize, usize, f64>>,
}

impl BlockCoupling {
    pub fn inactive(disc: &Discretization, inactive: &[bool]) -> Self {
        let mut entries = Vec::new();
        let scale = 1.0 / disc.spec.alpha;
        for (k, row) in disc.space.coupling.iter().enumerate() {
            if !inactive[k] {
                continue;
            }
            let s = scale / disc.space.measures[k];
            for &(di, ci) in row {
                let Some(i) = disc.dofs.free_index[di] else { continue };
                for &(dj, cj) in row {
                    if let Some(j) = disc.dofs.free_index[dj] {
                        entries.push(Triplet::new(i, j, s * ci * cj));
                    }
                }
            }
        }
        BlockCoupling { entries }
    }
}

const MAX_REFINEMENT: usize = 5;

/// Solve
///
/// ```text
/// [ A   G ] [u]   [rhs_state  ]
/// [-M   A ] [φ] = [rhs_adjoint]
/// ```
///
/// by a sparse LU factorization of the equivalent symmetric system in
/// `(u, -φ)`, followed by iterative refinement while the residual decreases.
pub fn solve_linear_block(
    a: &SparseOperator,
    m: &SparseOperator,
    coupling: &BlockCoupling,
    rhs_state: &[f64],
    rhs_adjoint: &[f64],
    eta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.dim();
    let mut entries: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(4 * a.matrix.compute_nnz() + coupling.entries.len());
    let push_block = |entries: &mut Vec<Triplet<usize, usize, f64>>, op: &SparseOperator, r0: usize, c0: usize| {
        let mat = op.matrix.as_ref();
        for j in 0..mat.ncols() {
            for (i, v) in mat.row_idx_of_col(j).zip(mat.val_of_col(j)) {
                entries.push(Triplet::new(r0 + i, c0 + j, *v));
            }
        }
    };
    push_block(&mut entries, m, 0, 0);
    push_block(&mut entries, a, 0, n);
    push_block(&mut entries, a, n, 0);
    for t in &coupling.entries {
        entries.push(Triplet::new(n + t.row, n + t.col, -t.val));
    }
    let k = SparseColMat::<usize, f64>::try_new_from_triplets(2 * n, 2 * n, &entries).map_err(|e| Error::Factorization {
        eta,
        dofs: n,
        reason: format!("{e:?}"),
    })?;
    let lu: Lu<usize, f64> = k.sp_lu().map_err(|e| Error::Factorization {
        eta,
        dofs: n,
        reason: format!("{e:?}"),
    })?;
    let b = Col::<f64>::from_fn(2 * n, |i| if i < n { -rhs_adjoint[i] } else { rhs_state[i - n] });
    let residual = |x: &Col<f64>| {
        let mut acc = Compensated::from(&(0..2 * n).map(|i| b[i]).collect::<Vec<_>>());
        let kr = k.as_ref();
        for j in 0..2 * n {
            for (i, v) in kr.row_idx_of_col(j).zip(kr.val_of_col(j)) {
                acc.add_product(i, -*v, x[j]);
            }
        }
        let r = acc.finish();
        Col::<f64>::from_fn(2 * n, |i| r[i])
    };
    let mut x = lu.solve(&b);
    let mut r = residual(&x);
    let mut rnorm = r.norm_l2();
    for _ in 0..MAX_REFINEMENT {
        let trial = &x + lu.solve(&r);
        let trial_r = residual(&trial);
        let trial_norm = trial_r.norm_l2();
        if !(trial_norm < rnorm) {
            break;
        }
        (x, r, rnorm) = (trial, trial_r, trial_norm);
    }
    if !(0..2 * n).all(|i| x[i].is_finite()) {
        return Err(Error::Factorization {
            eta,
            dofs: n,
            reason: "non-finite solution".into(),
        });
    }
    let u = (0..n).map(|i| x[i]).collect();
    let phi = (0..n).map(|i| -x[n + i]).collect();
    Ok((u, phi))
}

/// Which bound, if any, an entity sits at during the active set iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActiveState {
    Lower,
    Inactive,
    Upper,
}

fn signature_summary(sig: &[ActiveState]) -> String {
    let count = |s| sig.iter().filter(|&&x| x == s).count();
    format!(
        "lower={} upper={} inactive={}",
        count(ActiveState::Lower),
        count(ActiveState::Upper),
        count(ActiveState::Inactive)
    )
}

#[derive(Debug, Clone)]
pub struct KktSolution {
    pub u: P2Function,
    pub phi: P2Function,
    pub q: ControlField,
    pub lower_active: Vec<usize>,
    pub upper_active: Vec<usize>,
    /// Number of coupled block solves.
    pub iterations: usize,
    pub state_residual: f64,
    pub adjoint_residual: f64,
    /// Reduced objective after each block solve.
    pub objective_history: Vec<f64>,
    /// Whether a non-terminal active set signature ever repeated.
    pub revisited_signature: bool,
}

pub const DEFAULT_MAX_PDAS: usize = 50;

/// Primal-dual active set iteration. The initial control is the admissible
/// value closest to zero on every entity.
pub fn solve_pdas(disc: &Discretization, max_iter: usize) -> Result<KktSolution> {
    if max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    let spec = &disc.spec;
    let (alpha, bounds) = (spec.alpha, spec.bounds);
    let n_ent = disc.space.len();
    let neg_ud: Vec<f64> = disc.ud_load.iter().map(|x| -x).collect();

    let mut q: Vec<f64> = vec![bounds.clamp(0.0); n_ent];
    let rhs = add(&disc.f_load, &disc.control_load(&q));
    let (mut u, mut phi) = solve_linear_block(&disc.a, &disc.mass, &BlockCoupling::default(), &rhs, &neg_ud, spec.eta)?;

    let mut previous: Option<Vec<ActiveState>> = None;
    let mut seen: std::collections::HashSet<Vec<ActiveState>> = Default::default();
    let mut revisited = false;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut last_two = (String::new(), String::new());

    for _ in 0..=max_iter {
        let d = disc.project_trace_free(&phi);
        let sig: Vec<ActiveState> = d
            .iter()
            .map(|&dk| {
                let raw = -dk / alpha;
                if raw >= bounds.upper {
                    ActiveState::Upper
                } else if raw <= bounds.lower {
                    ActiveState::Lower
                } else {
                    ActiveState::Inactive
                }
            })
            .collect();
        if previous.as_ref() == Some(&sig) {
            converged = true;
            break;
        }
        if iterations == max_iter {
            last_two = (
                previous.as_deref().map(signature_summary).unwrap_or_default(),
                signature_summary(&sig),
            );
            break;
        }
        if !seen.insert(sig.clone()) {
            revisited = true;
        }
        for (k, s) in sig.iter().enumerate() {
            q[k] = match s {
                ActiveState::Lower => bounds.lower,
                ActiveState::Upper => bounds.upper,
                ActiveState::Inactive => 0.0,
            };
        }
        let inactive: Vec<bool> = sig.iter().map(|&s| s == ActiveState::Inactive).collect();
        let rhs = add(&disc.f_load, &disc.control_load(&q));
        let g = BlockCoupling::inactive(disc, &inactive);
        let sol = solve_linear_block(&disc.a, &disc.mass, &g, &rhs, &neg_ud, spec.eta)?;
        u = sol.0;
        phi = sol.1;
        iterations += 1;
        let d = disc.project_trace_free(&phi);
        for k in 0..n_ent {
            if inactive[k] {
                q[k] = -d[k] / alpha;
            }
        }
        let obj = disc.objective(&P2Function::from_free(&disc.dofs, &u), &q);
        if let Some(&last) = history.last() {
            if obj > last * (1.0 + 1e-12) + 1e-14 {
                warn!("PDAS objective increased: {last:e} -> {obj:e}");
            }
        }
        history.push(obj);
        previous = Some(sig);
    }
    if !converged {
        return Err(Error::PdasNoConvergence {
            iterations: max_iter,
            previous: last_two.0,
            last: last_two.1,
        });
    }

    let d = disc.project_trace_free(&phi);
    let qf = control::clamp_field(spec.kind, &d, alpha, bounds)?;
    let sig = previous.unwrap_or_default();
    let pick = |s: ActiveState| sig.iter().enumerate().filter(|(_, &x)| x == s).map(|(k, _)| k).collect();
    Ok(KktSolution {
        state_residual: disc.state_residual(&u, &qf.values),
        adjoint_residual: disc.adjoint_residual(&u, &phi),
        u: P2Function::from_free(&disc.dofs, &u),
        phi: P2Function::from_free(&disc.dofs, &phi),
        lower_active: pick(ActiveState::Lower),
        upper_active: pick(ActiveState::Upper),
        q: qf,
        iterations,
        objective_history: history,
        revisited_signature: revisited,
    })
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Solution of the variational discretization: state and adjoint in `V_h`,
/// control `q̃ = clamp(-B_h φ̃_h / α)` pointwise.
#[derive(Debug, Clone)]
pub struct VdSolution {
    pub u: P2Function,
    pub phi: P2Function,
    pub kind: ControlKind,
    pub alpha: f64,
    pub bounds: Bounds,
    pub iterations: usize,
    /// Max-norm change of the adjoint coefficients in the last iteration.
    pub last_update: f64,
}

impl VdSolution {
    /// `q̃` on triangle `t` at barycentric coordinates `lam` (distributed), or
    /// on the boundary edge with `t` its edge index and `lam[0]` the edge
    /// parameter (boundary).
    pub fn control_at(&self, disc: &Discretization, t: usize, lam: [f64; 3]) -> f64 {
        let b = self.trace_at(disc, t, lam);
        self.bounds.clamp(-b / self.alpha)
    }

    /// `(B_h φ̃_h)` at the same location convention as [`Self::control_at`].
    pub fn trace_at(&self, disc: &Discretization, t: usize, lam: [f64; 3]) -> f64 {
        match self.kind {
            ControlKind::Distributed => self.phi.value_at(&disc.dofs, t, lam),
            ControlKind::Boundary => {
                let tr = &disc.traces.traces[t];
                let edge = &disc.mesh.edges[t];
                let (pa, pb) = (disc.mesh.vertices[edge.vertices[0]], disc.mesh.vertices[edge.vertices[1]]);
                let x = [pa[0] + lam[0] * (pb[0] - pa[0]), pa[1] + lam[0] * (pb[1] - pa[1])];
                let geo = ElementGeometry::new(&disc.mesh, tr.minus);
                let g = self.phi.gradient_at(&disc.dofs, &geo, tr.minus, geo.barycentric(x));
                g[0] * tr.normal[0] + g[1] * tr.normal[1]
            }
        }
    }
}

/// `⟨clamp(-B_h φ/α), B_h ψ_i⟩` on free dofs, by quadrature of the clamped integrand.
fn vd_control_load(disc: &Discretization, phi: &P2Function) -> Vec<f64> {
    let spec = &disc.spec;
    let mut b = vec![0.0; disc.dofs.n_dofs];
    match spec.kind {
        ControlKind::Distributed => {
            let rule = quadrature::triangle(EXACT_DEGREE);
            for t in 0..disc.mesh.n_triangles() {
                let geo = ElementGeometry::new(&disc.mesh, t);
                let cell = disc.dofs.cells[t];
                let local = phi.local(&disc.dofs, t);
                for (xi, w) in rule.iter() {
                    let s = p2::shape_values(p2::barycentric_from_reference(xi));
                    let val: f64 = s.iter().zip(&local).map(|(a, b)| a * b).sum();
                    let q = spec.bounds.clamp(-val / spec.alpha) * 2.0 * geo.area * w;
                    for i in 0..6 {
                        b[cell[i]] += q * s[i];
                    }
                }
            }
        }
        ControlKind::Boundary => {
            let rule = quadrature::edge(EDGE_EXACT_DEGREE);
            for &e in &disc.space.entities {
                let tr = &disc.traces.traces[e];
                let t = tr.minus;
                let geo = ElementGeometry::new(&disc.mesh, t);
                let edge = &disc.mesh.edges[e];
                let (pa, pb) = (disc.mesh.vertices[edge.vertices[0]], disc.mesh.vertices[edge.vertices[1]]);
                let local = phi.local(&disc.dofs, t);
                for (s, w) in rule.iter() {
                    let x = [pa[0] + s[0] * (pb[0] - pa[0]), pa[1] + s[0] * (pb[1] - pa[1])];
                    let grads = geo.basis_gradients(geo.barycentric(x));
                    let dn: Vec<f64> = grads.iter().map(|g| g[0] * tr.normal[0] + g[1] * tr.normal[1]).collect();
                    let val: f64 = dn.iter().zip(&local).map(|(a, b)| a * b).sum();
                    let q = spec.bounds.clamp(-val / spec.alpha) * w * tr.length;
                    for i in 0..6 {
                        b[disc.dofs.cells[t][i]] += q * dn[i];
                    }
                }
            }
        }
    }
    disc.dofs.restrict(&b)
}

pub const DEFAULT_VD_TOL: f64 = 1e-10;
pub const DEFAULT_VD_MAX_ITER: usize = 200;

/// Damped fixed point on `φ ↦ adjoint(state(clamp(-B_h φ / α)))`. The
/// damping starts at 1, halves whenever the update grows, and stays at or
/// above 1/4.
pub fn solve_variational(disc: &Discretization, tol: f64, max_iter: usize) -> Result<VdSolution> {
    let spec = &disc.spec;
    let n = disc.n_free();
    let mut phi = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut omega: f64 = 1.0;
    let mut last_update = f64::INFINITY;
    for it in 1..=max_iter {
        let phi_fn = P2Function::from_free(&disc.dofs, &phi);
        let rhs = add(&disc.f_load, &vd_control_load(disc, &phi_fn));
        u = disc.solve_a(&rhs);
        let mu = disc.mass.apply(&u);
        let adj: Vec<f64> = mu.iter().zip(&disc.ud_load).map(|(m, d)| m - d).collect();
        let phi_new = disc.solve_a(&adj);
        let raw = phi_new.iter().zip(&phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if raw > last_update {
            omega = (omega * 0.5).max(0.25);
        }
        let mut update: f64 = 0.0;
        for (p, pn) in phi.iter_mut().zip(&phi_new) {
            let next = *p + omega * (pn - *p);
            update = update.max((next - *p).abs());
            *p = next;
        }
        last_update = raw;
        if update <= tol {
            // state consistent with the final adjoint
            let phi_fn = P2Function::from_free(&disc.dofs, &phi);
            let rhs = add(&disc.f_load, &vd_control_load(disc, &phi_fn));
            u = disc.solve_a(&rhs);
            return Ok(VdSolution {
                u: P2Function::from_free(&disc.dofs, &u),
                phi: phi_fn,
                kind: spec.kind,
                alpha: spec.alpha,
                bounds: spec.bounds,
                iterations: it,
                last_update: update,
            });
        }
    }
    let _ = u;
    Err(Error::FixedPointNoConvergence {
        iterations: max_iter,
        update: last_update,
    })
}

/// `⟨q, B_h ψ_i⟩` on free dofs for a pointwise-evaluable control.
pub fn exact_control_load(disc: &Discretization, q: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; disc.dofs.n_dofs];
    match disc.spec.kind {
        ControlKind::Distributed => {
            b = c0ip::load_vector(&disc.mesh, &disc.dofs, q, EXACT_DEGREE);
        }
        ControlKind::Boundary => {
            let rule = quadrature::edge(EDGE_EXACT_DEGREE);
            for &e in &disc.space.entities {
                let tr = &disc.traces.traces[e];
                let geo = ElementGeometry::new(&disc.mesh, tr.minus);
                let edge = &disc.mesh.edges[e];
                let (pa, pb) = (disc.mesh.vertices[edge.vertices[0]], disc.mesh.vertices[edge.vertices[1]]);
                for (s, w) in rule.iter() {
                    let x = [pa[0] + s[0] * (pb[0] - pa[0]), pa[1] + s[0] * (pb[1] - pa[1])];
                    let grads = geo.basis_gradients(geo.barycentric(x));
                    let qx = q(x) * w * tr.length;
                    for (i, g) in grads.iter().enumerate() {
                        b[disc.dofs.cells[tr.minus][i]] += qx * (g[0] * tr.normal[0] + g[1] * tr.normal[1]);
                    }
                }
            }
        }
    }
    disc.dofs.restrict(&b)
}

/// The auxiliary solutions `P_h u` and `P_h φ`:
/// `a_h(P_h u, v) = f(v) + ⟨q, B_h v⟩` and `a_h(v, P_h φ) = (u - u_d, v)` with
/// the exact control `q` and exact state `u`.
pub fn projection_ph(
    disc: &Discretization,
    exact_q: impl Fn(Point) -> f64,
    exact_u: impl Fn(Point) -> f64,
) -> (P2Function, P2Function) {
    let rhs_u = add(&disc.f_load, &exact_control_load(disc, exact_q));
    let pu = disc.solve_a(&rhs_u);
    let state = disc.dofs.restrict(&c0ip::load_vector(&disc.mesh, &disc.dofs, exact_u, EXACT_DEGREE));
    let misfit: Vec<f64> = state.iter().zip(&disc.ud_load).map(|(a, b)| a - b).collect();
    let pphi = disc.solve_a(&misfit);
    (P2Function::from_free(&disc.dofs, &pu), P2Function::from_free(&disc.dofs, &pphi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_unit_square, Diagonal};

    fn spec(kind: ControlKind, alpha: f64, bounds: Bounds) -> ProblemSpec {
        ProblemSpec {
            kind,
            alpha,
            bounds,
            eta: 10.0,
            f: Arc::new(|p: Point| 1000.0 * (3.0 * p[0]).sin() * p[1]),
            u_d: Arc::new(|p: Point| p[0] - p[1]),
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let m = make_unit_square(2, Diagonal::Ne).unwrap();
        let b = Bounds::new(-1.0, 1.0).unwrap();
        assert!(matches!(Discretization::new(&spec(ControlKind::Distributed, 0.0, b), &m), Err(Error::BadAlpha(_))));
        let mut s = spec(ControlKind::Distributed, 1.0, b);
        s.eta = -1.0;
        assert!(matches!(Discretization::new(&s, &m), Err(Error::BadPenalty(_))));
        s.eta = 10.0;
        s.bounds = Bounds { lower: 2.0, upper: 1.0 };
        assert!(matches!(Discretization::new(&s, &m), Err(Error::BadBounds { .. })));
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let m = make_unit_square(3, Diagonal::Ne).unwrap();
        let disc = Discretization::new(&spec(ControlKind::Distributed, 1.0, Bounds::unbounded()), &m).unwrap();
        let n = disc.n_free();
        let g = BlockCoupling::inactive(&disc, &vec![true; disc.space.len()]);
        let (u, phi) = solve_linear_block(&disc.a, &disc.mass, &g, &vec![0.0; n], &vec![0.0; n], 10.0).unwrap();
        assert!(u.iter().chain(&phi).all(|&x| x == 0.0));
    }

    #[test]
    fn decoupled_block_matches_two_spd_solves() {
        let m = make_unit_square(4, Diagonal::Nw).unwrap();
        let disc = Discretization::new(&spec(ControlKind::Boundary, 1.0, Bounds::new(-3.0, 2.0).unwrap()), &m).unwrap();
        let q = vec![-1.5; disc.space.len()];
        let rhs = add(&disc.f_load, &disc.control_load(&q));
        let neg: Vec<f64> = disc.ud_load.iter().map(|x| -x).collect();
        let (u, phi) = solve_linear_block(&disc.a, &disc.mass, &BlockCoupling::default(), &rhs, &neg, 10.0).unwrap();
        let u2 = disc.solve_a(&rhs);
        let mu = disc.mass.apply(&u2);
        let phi2 = disc.solve_a(&add(&mu, &neg));
        let scale_u = norm(&u2);
        let scale_p = norm(&phi2);
        assert!(u.iter().zip(&u2).all(|(a, b)| (a - b).abs() <= 1e-12 * scale_u));
        assert!(phi.iter().zip(&phi2).all(|(a, b)| (a - b).abs() <= 1e-12 * scale_p));
        assert!(disc.state_residual(&u, &q) <= 1e-12);
        assert!(disc.adjoint_residual(&u, &phi) <= 1e-12);
    }

    #[test]
    fn pdas_terminates_with_clamp_identity() {
        for kind in [ControlKind::Distributed, ControlKind::Boundary] {
            let m = make_unit_square(4, Diagonal::Ne).unwrap();
            let s = spec(kind, 1e-3, Bounds::new(-0.5, 0.5).unwrap());
            let disc = Discretization::new(&s, &m).unwrap();
            let sol = solve_pdas(&disc, DEFAULT_MAX_PDAS).unwrap();
            assert!(sol.state_residual <= 1e-10 && sol.adjoint_residual <= 1e-10);
            let d = disc.project_trace_free(&disc.dofs.restrict(&sol.phi.coeffs));
            let expect = control::clamp_field(kind, &d, s.alpha, s.bounds).unwrap();
            assert_eq!(sol.q.values, expect.values);
            let report = control::vi_residual(&disc.space, &sol.q, &disc.trace(&sol.phi), s.alpha);
            assert!(report.satisfied(), "{kind:?}: {:?}", report.violations);
        }
    }

    #[test]
    fn pdas_iteration_cap_reports_signatures() {
        let m = make_unit_square(4, Diagonal::Ne).unwrap();
        let disc = Discretization::new(&spec(ControlKind::Distributed, 1e-5, Bounds::new(-0.01, 0.01).unwrap()), &m).unwrap();
        match solve_pdas(&disc, 1) {
            Err(Error::PdasNoConvergence { iterations: 1, last, .. }) => assert!(last.contains("lower=")),
            Ok(s) => assert_eq!(s.iterations, 1),
            Err(e) => panic!("{e}"),
        }
        assert!(solve_pdas(&disc, 0).is_err());
    }
}
