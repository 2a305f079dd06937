//! The C⁰ interior penalty bilinear form
//!
//! ```text
//! a_h(w, v) = Σ_T ∫_T D²w : D²v
//!           - Σ_e ∫_e {∂²w/∂n²} [∇v] - Σ_e ∫_e {∂²v/∂n²} [∇w]
//!           + Σ_e ∫_e (η / h_e) [∇w] [∇v]
//! ```
//!
//! with edge sums over interior edges only, together with the P2 mass matrix,
//! load vectors and the mesh-dependent energy norm.

use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::p2::{DofMap, ElementGeometry, Mat2, P2Function};
use crate::quadrature;

/// Gauss points per edge; every edge integrand handled here is at most quadratic.
pub const EDGE_POINTS: usize = 2;

pub(crate) fn frobenius(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub(crate) fn normal_normal(h: &Mat2, n: [f64; 2]) -> f64 {
    n[0] * (h[0][0] * n[0] + h[0][1] * n[1]) + n[1] * (h[1][0] * n[0] + h[1][1] * n[1])
}

/// Traces of the P2 basis on one edge.
///
/// Interior edges: `normal` points from `minus` (the first adjacent triangle)
/// to `plus`; `jump` holds `[∇ψ]·` = `(∇ψ₋ - ∇ψ₊)·n` at the Gauss points, `mean`
/// holds `{∂²ψ/∂n²}` and `second_jump` holds `∂²ψ₊/∂n² - ∂²ψ₋/∂n²`.
///
/// Boundary edges: `normal` is the outward normal, `jump` holds `∂ψ/∂n`,
/// `mean` holds `∂²ψ/∂n²` from the single adjacent triangle and
/// `second_jump` is unused (zero).
#[derive(Debug, Clone)]
pub struct EdgeTrace {
    pub edge: usize,
    pub minus: usize,
    pub plus: Option<usize>,
    pub length: f64,
    pub normal: [f64; 2],
    pub points: [Point; EDGE_POINTS],
    /// Physical quadrature weights (sum to `length`).
    pub weights: [f64; EDGE_POINTS],
    pub dofs: Vec<usize>,
    pub jump: Vec<[f64; EDGE_POINTS]>,
    pub mean: Vec<f64>,
    pub second_jump: Vec<f64>,
}

impl EdgeTrace {
    pub fn is_interior(&self) -> bool {
        self.plus.is_some()
    }

    /// Jump of the normal derivative of `v` at the Gauss points.
    pub fn jump_of(&self, v: &[f64]) -> [f64; EDGE_POINTS] {
        let mut out = [0.0; EDGE_POINTS];
        for (d, j) in self.dofs.iter().zip(&self.jump) {
            for g in 0..EDGE_POINTS {
                out[g] += v[*d] * j[g];
            }
        }
        out
    }

    pub fn mean_of(&self, v: &[f64]) -> f64 {
        self.dofs.iter().zip(&self.mean).map(|(d, m)| v[*d] * m).sum()
    }

    pub fn second_jump_of(&self, v: &[f64]) -> f64 {
        self.dofs.iter().zip(&self.second_jump).map(|(d, m)| v[*d] * m).sum()
    }

    /// `∫_e [∇v]²`, exact for P2.
    pub fn jump_squared(&self, v: &[f64]) -> f64 {
        let j = self.jump_of(v);
        (0..EDGE_POINTS).map(|g| self.weights[g] * j[g] * j[g]).sum()
    }
}

/// Per-edge basis traces for every edge of a mesh, in edge order.
#[derive(Debug, Clone)]
pub struct EdgeTraceCache {
    pub traces: Vec<EdgeTrace>,
}

impl EdgeTraceCache {
    pub fn new(mesh: &Mesh, dofs: &DofMap) -> Self {
        let rule = quadrature::edge(3);
        let traces = mesh
            .edges
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let [a, b] = edge.vertices;
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let length = crate::mesh::dist(pa, pb);
                let (minus, plus) = edge.triangles;
                let mut normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
                let c = mesh.centroid(minus);
                let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                if normal[0] * (mid[0] - c[0]) + normal[1] * (mid[1] - c[1]) < 0.0 {
                    normal = [-normal[0], -normal[1]];
                }
                let mut points = [[0.0; 2]; EDGE_POINTS];
                let mut weights = [0.0; EDGE_POINTS];
                for (g, (s, w)) in rule.iter().enumerate() {
                    points[g] = [pa[0] + s[0] * (pb[0] - pa[0]), pa[1] + s[0] * (pb[1] - pa[1])];
                    weights[g] = w * length;
                }
                let mut trace = EdgeTrace {
                    edge: e,
                    minus,
                    plus,
                    length,
                    normal,
                    points,
                    weights,
                    dofs: Vec::with_capacity(9),
                    jump: Vec::with_capacity(9),
                    mean: Vec::with_capacity(9),
                    second_jump: Vec::with_capacity(9),
                };
                let interior = plus.is_some();
                let sides = std::iter::once((minus, 1.0)).chain(plus.map(|t| (t, -1.0)));
                for (t, sign) in sides {
                    let geo = ElementGeometry::new(mesh, t);
                    let hess = geo.basis_hessians();
                    let grads: Vec<[[f64; 2]; 6]> =
                        points.iter().map(|&p| geo.basis_gradients(geo.barycentric(p))).collect();
                    for (i, &d) in dofs.cells[t].iter().enumerate() {
                        let slot = match trace.dofs.iter().position(|&x| x == d) {
                            Some(s) => s,
                            None => {
                                trace.dofs.push(d);
                                trace.jump.push([0.0; EDGE_POINTS]);
                                trace.mean.push(0.0);
                                trace.second_jump.push(0.0);
                                trace.dofs.len() - 1
                            }
                        };
                        for g in 0..EDGE_POINTS {
                            let dn = grads[g][i][0] * normal[0] + grads[g][i][1] * normal[1];
                            trace.jump[slot][g] += sign * dn;
                        }
                        let nn = normal_normal(&hess[i], normal);
                        if interior {
                            trace.mean[slot] += 0.5 * nn;
                            trace.second_jump[slot] -= sign * nn;
                        } else {
                            trace.mean[slot] += nn;
                        }
                    }
                }
                trace
            })
            .collect();
        EdgeTraceCache { traces }
    }

    pub fn interior(&self) -> impl Iterator<Item = &EdgeTrace> {
        self.traces.iter().filter(|t| t.is_interior())
    }

    pub fn boundary(&self) -> impl Iterator<Item = &EdgeTrace> {
        self.traces.iter().filter(|t| !t.is_interior())
    }
}

/// Which dofs a matrix is assembled over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Free dofs only (the reduced system on `V_h`).
    Free,
    /// All dofs, boundary included.
    All,
}

/// Sparse symmetric matrix over free dofs (or all dofs).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub matrix: SparseColMat<usize, f64>,
    pub scope: Scope,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.matrix.nrows()];
        let m = self.matrix.as_ref();
        for j in 0..m.ncols() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `|S| |x|`, the scale of the terms summed in `S x`.
    pub fn apply_abs(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.matrix.nrows()];
        let m = self.matrix.as_ref();
        for j in 0..m.ncols() {
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                y[i] += v.abs() * x[j].abs();
            }
        }
        y
    }

    /// Accumulate `sign · S x` into `acc` without intermediate rounding loss.
    pub(crate) fn apply_into(&self, x: &[f64], sign: f64, acc: &mut Compensated) {
        let m = self.matrix.as_ref();
        for j in 0..m.ncols() {
            let xj = sign * x[j];
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                acc.add_product(i, *v, xj);
            }
        }
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.apply(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let m = self.matrix.as_ref();
        m.row_idx_of_col(j).zip(m.val_of_col(j)).filter(|(r, _)| *r == i).map(|(_, v)| *v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.as_ref().val().iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let m = self.matrix.as_ref();
        let t = m.transpose().to_col_major().expect("transpose");
        let mut worst: f64 = 0.0;
        for j in 0..m.ncols() {
            let col: std::collections::HashMap<usize, f64> =
                m.row_idx_of_col(j).zip(m.val_of_col(j).iter().copied()).collect();
            let tr = t.as_ref();
            let mut seen = 0;
            for (i, v) in tr.row_idx_of_col(j).zip(tr.val_of_col(j)) {
                worst = worst.max((col.get(&i).copied().unwrap_or(0.0) - v).abs());
                seen += 1;
            }
            if seen < col.len() {
                for (i, v) in &col {
                    if !tr.row_idx_of_col(j).any(|r| r == *i) {
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        worst
    }

    /// Attempt a sparse Cholesky factorization, reporting indefiniteness.
    pub fn cholesky(&self, eta: f64) -> Result<faer::sparse::linalg::solvers::Llt<usize, f64>> {
        self.matrix.sp_cholesky(faer::Side::Lower).map_err(|_| Error::Indefinite { eta })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; self.matrix.ncols()]; n];
        let m = self.matrix.as_ref();
        for j in 0..m.ncols() {
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                d[i][j] += v;
            }
        }
        d
    }
}

/// Triplet accumulator that maps global dofs to rows of the chosen scope.
pub(crate) struct Accumulator<'a> {
    dofs: &'a DofMap,
    scope: Scope,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl<'a> Accumulator<'a> {
    pub(crate) fn new(dofs: &'a DofMap, scope: Scope) -> Self {
        Accumulator {
            dofs,
            scope,
            entries: Vec::new(),
        }
    }

    pub(crate) fn index(&self, d: usize) -> Option<usize> {
        match self.scope {
            Scope::All => Some(d),
            Scope::Free => self.dofs.free_index[d],
        }
    }

    pub(crate) fn add(&mut self, gi: usize, gj: usize, v: f64) {
        if let (Some(i), Some(j)) = (self.index(gi), self.index(gj)) {
            self.entries.push(Triplet::new(i, j, v));
        }
    }

    pub(crate) fn finish(self) -> SparseOperator {
        let n = match self.scope {
            Scope::All => self.dofs.n_dofs,
            Scope::Free => self.dofs.n_free(),
        };
        let matrix = SparseColMat::try_new_from_triplets(n, n, &self.entries).expect("valid triplets");
        SparseOperator { matrix, scope: self.scope }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::BadPenalty(eta))
    }
}

/// Assemble `a_h` over the free dofs.
pub fn assemble_a_h(mesh: &Mesh, dofs: &DofMap, eta: f64) -> Result<SparseOperator> {
    let traces = EdgeTraceCache::new(mesh, dofs);
    assemble_a_h_with(mesh, dofs, &traces, eta, Scope::Free)
}

pub fn assemble_a_h_with(
    mesh: &Mesh,
    dofs: &DofMap,
    traces: &EdgeTraceCache,
    eta: f64,
    scope: Scope,
) -> Result<SparseOperator> {
    check_eta(eta)?;
    let mut acc = Accumulator::new(dofs, scope);
    add_element_hessian_terms(mesh, dofs, &mut acc);
    for tr in traces.interior() {
        let pen = eta / tr.length;
        for (a, &da) in tr.dofs.iter().enumerate() {
            for (b, &db) in tr.dofs.iter().enumerate() {
                let mut v = 0.0;
                for g in 0..EDGE_POINTS {
                    let (ja, jb) = (tr.jump[a][g], tr.jump[b][g]);
                    v += tr.weights[g] * (-tr.mean[b] * ja - tr.mean[a] * jb + pen * ja * jb);
                }
                acc.add(da, db, v);
            }
        }
    }
    Ok(acc.finish())
}

fn add_element_hessian_terms(mesh: &Mesh, dofs: &DofMap, acc: &mut Accumulator) {
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let h = geo.basis_hessians();
        let cell = dofs.cells[t];
        for i in 0..6 {
            for j in 0..6 {
                acc.add(cell[i], cell[j], geo.area * frobenius(&h[i], &h[j]));
            }
        }
    }
}

/// Matrix of the energy inner product: broken Hessian term plus the
/// η-weighted jump penalty, without the consistency terms of `a_h`.
pub fn assemble_energy(mesh: &Mesh, dofs: &DofMap, traces: &EdgeTraceCache, eta: f64, scope: Scope) -> Result<SparseOperator> {
    check_eta(eta)?;
    let mut acc = Accumulator::new(dofs, scope);
    add_element_hessian_terms(mesh, dofs, &mut acc);
    for tr in traces.interior() {
        let pen = eta / tr.length;
        for (a, &da) in tr.dofs.iter().enumerate() {
            for (b, &db) in tr.dofs.iter().enumerate() {
                let v: f64 = (0..EDGE_POINTS).map(|g| tr.weights[g] * pen * tr.jump[a][g] * tr.jump[b][g]).sum();
                acc.add(da, db, v);
            }
        }
    }
    Ok(acc.finish())
}

/// P2 mass matrix.
pub fn assemble_mass(mesh: &Mesh, dofs: &DofMap, scope: Scope) -> SparseOperator {
    let rule = quadrature::triangle(4);
    let mut acc = Accumulator::new(dofs, scope);
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let cell = dofs.cells[t];
        let mut local = [[0.0; 6]; 6];
        for (xi, w) in rule.iter() {
            let s = crate::p2::shape_values(crate::p2::barycentric_from_reference(xi));
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += 2.0 * geo.area * w * s[i] * s[j];
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                acc.add(cell[i], cell[j], local[i][j]);
            }
        }
    }
    acc.finish()
}

/// `∫_Ω f ψ_i` for every dof (full length), with the given triangle rule degree.
pub fn load_vector(mesh: &Mesh, dofs: &DofMap, f: impl Fn(Point) -> f64, degree: usize) -> Vec<f64> {
    let rule = quadrature::triangle(degree);
    let mut b = vec![0.0; dofs.n_dofs];
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        for (xi, w) in rule.iter() {
            let lam = crate::p2::barycentric_from_reference(xi);
            let fx = f(geo.map(xi)) * 2.0 * geo.area * w;
            for (d, s) in dofs.cells[t].iter().zip(crate::p2::shape_values(lam)) {
                b[*d] += fx * s;
            }
        }
    }
    b
}

/// Squared energy norm `Σ_T ‖D²v‖² + Σ_e (η/h_e) ∫_e [∇v]²` by direct element
/// and edge loops.
pub fn energy_norm_squared(mesh: &Mesh, dofs: &DofMap, traces: &EdgeTraceCache, v: &P2Function, eta: f64) -> f64 {
    let element: f64 = (0..mesh.n_triangles())
        .map(|t| {
            let geo = ElementGeometry::new(mesh, t);
            let h = v.hessian(dofs, &geo, t);
            geo.area * frobenius(&h, &h)
        })
        .sum();
    element + penalty_squared(traces, v, eta)
}

pub fn energy_norm(mesh: &Mesh, dofs: &DofMap, traces: &EdgeTraceCache, v: &P2Function, eta: f64) -> f64 {
    energy_norm_squared(mesh, dofs, traces, v, eta).sqrt()
}

/// `Σ_e (η/h_e) ∫_e [∇v]²` over interior edges.
pub fn penalty_squared(traces: &EdgeTraceCache, v: &P2Function, eta: f64) -> f64 {
    traces.interior().map(|tr| eta / tr.length * tr.jump_squared(&v.coeffs)).sum()
}

/// Consistency plus penalty contributions to `a_h(v, v)`, i.e. everything
/// except the element Hessian term.
pub fn edge_form(traces: &EdgeTraceCache, v: &P2Function, eta: f64) -> f64 {
    traces
        .interior()
        .map(|tr| {
            let j = tr.jump_of(&v.coeffs);
            let m = tr.mean_of(&v.coeffs);
            (0..EDGE_POINTS)
                .map(|g| tr.weights[g] * (-2.0 * m * j[g] + eta / tr.length * j[g] * j[g]))
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// `‖u - v_h‖_h`
    pub energy: f64,
    /// `‖u - v_h‖_{L2}`
    pub l2: f64,
}

/// Energy and L2 errors of `v_h` against a smooth exact solution. The exact
/// solution has no normal-derivative jumps, so the penalty part only sees `v_h`.
pub fn error_norms(
    mesh: &Mesh,
    dofs: &DofMap,
    traces: &EdgeTraceCache,
    v_h: &P2Function,
    exact: impl Fn(Point) -> f64,
    exact_hessian: impl Fn(Point) -> Mat2,
    eta: f64,
) -> ErrorNorms {
    let rule = quadrature::triangle(8);
    let mut hess = 0.0;
    let mut l2 = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let hh = v_h.hessian(dofs, &geo, t);
        for (xi, w) in rule.iter() {
            let x = geo.map(xi);
            let lam = crate::p2::barycentric_from_reference(xi);
            let he = exact_hessian(x);
            let d = [[he[0][0] - hh[0][0], he[0][1] - hh[0][1]], [he[1][0] - hh[1][0], he[1][1] - hh[1][1]]];
            let jw = 2.0 * geo.area * w;
            hess += jw * frobenius(&d, &d);
            let e = exact(x) - v_h.value_at(dofs, t, lam);
            l2 += jw * e * e;
        }
    }
    ErrorNorms {
        energy: (hess + penalty_squared(traces, v_h, eta)).sqrt(),
        l2: l2.sqrt(),
    }
}


/// Vector of double-double accumulators (error-free sums and products).
#[derive(Debug, Clone)]
pub(crate) struct Compensated {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl Compensated {
    pub(crate) fn from(start: &[f64]) -> Self {
        Compensated {
            hi: start.to_vec(),
            lo: vec![0.0; start.len()],
        }
    }

    pub(crate) fn add(&mut self, i: usize, v: f64) {
        let s = self.hi[i] + v;
        let bp = s - self.hi[i];
        let err = (self.hi[i] - (s - bp)) + (v - bp);
        self.hi[i] = s;
        self.lo[i] += err;
    }

    pub(crate) fn add_product(&mut self, i: usize, a: f64, b: f64) {
        let p = a * b;
        self.lo[i] += a.mul_add(b, -p);
        self.add(i, p);
    }

    pub(crate) fn finish(self) -> Vec<f64> {
        self.hi.iter().zip(&self.lo).map(|(h, l)| h + l).collect()
    }
}
