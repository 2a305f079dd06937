//! Continuous piecewise quadratic Lagrange elements.
//!
//! Local dof order on a triangle `[v0, v1, v2]`: the three vertices, then the
//! midpoints of local edges 0, 1, 2 (edge `i` opposite vertex `i`). Shape
//! functions are written in barycentric coordinates,
//! `λ_i (2 λ_i - 1)` at vertices and `4 λ_j λ_k` at the midpoint of edge `(j, k)`,
//! so physical gradients and Hessians only need the constant `∇λ_i`.

use crate::mesh::{Mesh, Point};

pub type Mat2 = [[f64; 2]; 2];

/// Vertex pairs `(j, k)` spanning local edge `i`.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_vertices: usize,
    pub n_dofs: usize,
    /// Local-to-global map per triangle.
    pub cells: Vec<[usize; 6]>,
    /// Dofs located on the boundary, fixed to zero in `V_h`.
    pub constrained: Vec<bool>,
    /// Position of each dof among the free ones.
    pub free_index: Vec<Option<usize>>,
    /// Global index of each free dof.
    pub free_dofs: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let nv = mesh.n_vertices();
        let n_dofs = nv + mesh.n_edges();
        let cells = mesh
            .triangles
            .iter()
            .zip(&mesh.triangle_edges)
            .map(|(t, e)| [t[0], t[1], t[2], nv + e[0], nv + e[1], nv + e[2]])
            .collect();
        let constrained: Vec<bool> = (0..nv)
            .map(|v| mesh.is_boundary_vertex(v))
            .chain(mesh.edges.iter().map(|e| e.is_boundary()))
            .collect();
        let mut free_index = vec![None; n_dofs];
        let mut free_dofs = Vec::new();
        for (d, &c) in constrained.iter().enumerate() {
            if !c {
                free_index[d] = Some(free_dofs.len());
                free_dofs.push(d);
            }
        }
        DofMap {
            n_vertices: nv,
            n_dofs,
            cells,
            constrained,
            free_index,
            free_dofs,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Physical location of every dof.
    pub fn dof_points(&self, mesh: &Mesh) -> Vec<Point> {
        mesh.vertices
            .iter()
            .copied()
            .chain(mesh.edges.iter().map(|e| {
                let (p, q) = (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
                [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
            }))
            .collect()
    }

    /// Scatter a vector over free dofs into a full coefficient vector.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs];
        for (&d, &x) in self.free_dofs.iter().zip(free) {
            full[d] = x;
        }
        full
    }

    /// Gather the free entries of a full vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }
}

/// Coefficients of a P2 function over all dofs of a [`DofMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct P2Function {
    pub coeffs: Vec<f64>,
}

impl P2Function {
    pub fn zeros(dofs: &DofMap) -> Self {
        P2Function { coeffs: vec![0.0; dofs.n_dofs] }
    }

    pub fn from_free(dofs: &DofMap, free: &[f64]) -> Self {
        P2Function { coeffs: dofs.expand(free) }
    }

    pub fn local(&self, dofs: &DofMap, t: usize) -> [f64; 6] {
        dofs.cells[t].map(|d| self.coeffs[d])
    }

    /// True when every constrained coefficient vanishes, i.e. the function is in `V_h`.
    pub fn in_vh(&self, dofs: &DofMap) -> bool {
        self.coeffs.iter().zip(&dofs.constrained).all(|(&c, &b)| !b || c == 0.0)
    }

    pub fn value_at(&self, dofs: &DofMap, t: usize, lam: [f64; 3]) -> f64 {
        let local = self.local(dofs, t);
        shape_values(lam).iter().zip(&local).map(|(s, c)| s * c).sum()
    }

    pub fn gradient_at(&self, dofs: &DofMap, geo: &ElementGeometry, t: usize, lam: [f64; 3]) -> [f64; 2] {
        let local = self.local(dofs, t);
        let g = geo.basis_gradients(lam);
        let mut out = [0.0; 2];
        for (gi, c) in g.iter().zip(&local) {
            out[0] += c * gi[0];
            out[1] += c * gi[1];
        }
        out
    }

    pub fn hessian(&self, dofs: &DofMap, geo: &ElementGeometry, t: usize) -> Mat2 {
        let local = self.local(dofs, t);
        let hs = geo.basis_hessians();
        let mut out = [[0.0; 2]; 2];
        for (h, c) in hs.iter().zip(&local) {
            for r in 0..2 {
                for s in 0..2 {
                    out[r][s] += c * h[r][s];
                }
            }
        }
        out
    }
}

/// Affine data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub corners: [Point; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    /// Columns `p1 - p0` and `p2 - p0`.
    pub jacobian: Mat2,
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        Self::from_corners(mesh.corners(t))
    }

    pub fn from_corners(corners: [Point; 3]) -> Self {
        let [p0, p1, p2] = corners;
        let j = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // rows of J^{-1} are the gradients of λ1, λ2
        let g1 = [j[1][1] / det, -j[0][1] / det];
        let g2 = [-j[1][0] / det, j[0][0] / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        ElementGeometry {
            corners,
            area: 0.5 * det.abs(),
            grad_lambda: [g0, g1, g2],
            jacobian: j,
        }
    }

    /// Map a reference point `(ξ, η)` to the element.
    pub fn map(&self, xi: [f64; 2]) -> Point {
        let [p0, _, _] = self.corners;
        let j = self.jacobian;
        [
            p0[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            p0[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let p0 = self.corners[0];
        let d = [x[0] - p0[0], x[1] - p0[1]];
        let [_, g1, g2] = self.grad_lambda;
        let l1 = g1[0] * d[0] + g1[1] * d[1];
        let l2 = g2[0] * d[0] + g2[1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn basis_gradients(&self, lam: [f64; 3]) -> [[f64; 2]; 6] {
        shape_gradients(lam, &self.grad_lambda)
    }

    pub fn basis_hessians(&self) -> [Mat2; 6] {
        shape_hessians(&self.grad_lambda)
    }

    pub fn diameter(&self) -> f64 {
        let [p, q, r] = self.corners;
        crate::mesh::dist(p, q).max(crate::mesh::dist(q, r)).max(crate::mesh::dist(r, p))
    }
}

pub fn barycentric_from_reference(xi: [f64; 2]) -> [f64; 3] {
    [1.0 - xi[0] - xi[1], xi[0], xi[1]]
}

pub fn shape_values(lam: [f64; 3]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for i in 0..3 {
        out[i] = lam[i] * (2.0 * lam[i] - 1.0);
        let [j, k] = EDGE_VERTICES[i];
        out[3 + i] = 4.0 * lam[j] * lam[k];
    }
    out
}

pub fn shape_gradients(lam: [f64; 3], gl: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * lam[i] - 1.0;
        out[i] = [s * gl[i][0], s * gl[i][1]];
        let [j, k] = EDGE_VERTICES[i];
        out[3 + i] = [
            4.0 * (lam[k] * gl[j][0] + lam[j] * gl[k][0]),
            4.0 * (lam[k] * gl[j][1] + lam[j] * gl[k][1]),
        ];
    }
    out
}

pub fn shape_hessians(gl: &[[f64; 2]; 3]) -> [Mat2; 6] {
    let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
    let mut out = [[[0.0; 2]; 2]; 6];
    for i in 0..3 {
        let o = outer(gl[i], gl[i]);
        out[i] = [[4.0 * o[0][0], 4.0 * o[0][1]], [4.0 * o[1][0], 4.0 * o[1][1]]];
        let [j, k] = EDGE_VERTICES[i];
        let a = outer(gl[j], gl[k]);
        let b = outer(gl[k], gl[j]);
        out[3 + i] = [
            [4.0 * (a[0][0] + b[0][0]), 4.0 * (a[0][1] + b[0][1])],
            [4.0 * (a[1][0] + b[1][0]), 4.0 * (a[1][1] + b[1][1])],
        ];
    }
    out
}

const REFERENCE_GRAD_LAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Value, gradient and Hessian of local shape function `i` at a point of
/// the reference triangle `(0,0), (1,0), (0,1)`.
pub fn eval_basis(i: usize, xi: [f64; 2]) -> (f64, [f64; 2], Mat2) {
    assert!(i < 6, "P2 has six local shape functions");
    let lam = barycentric_from_reference(xi);
    (
        shape_values(lam)[i],
        shape_gradients(lam, &REFERENCE_GRAD_LAMBDA)[i],
        shape_hessians(&REFERENCE_GRAD_LAMBDA)[i],
    )
}

/// Physical Hessian by affine pullback: `J^{-T} H_ref J^{-1}`.
pub fn pullback_hessian(geo: &ElementGeometry, reference: Mat2) -> Mat2 {
    let [_, g1, g2] = geo.grad_lambda;
    // J^{-1} has rows g1, g2
    let jinv = [g1, g2];
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for s in 0..2 {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    acc += jinv[a][r] * reference[a][b] * jinv[b][s];
                }
            }
            out[r][s] = acc;
        }
    }
    out
}

/// Nodal interpolant; with `constrain` set the boundary dofs are zeroed so
/// the result lies in `V_h`.
pub fn interpolate(mesh: &Mesh, dofs: &DofMap, field: impl Fn(Point) -> f64, constrain: bool) -> P2Function {
    let coeffs = dofs
        .dof_points(mesh)
        .into_iter()
        .zip(&dofs.constrained)
        .map(|(p, &c)| if constrain && c { 0.0 } else { field(p) })
        .collect();
    P2Function { coeffs }
}

/// Locate the triangle containing `x` by brute force; returns the triangle
/// and barycentric coordinates.
pub fn locate(mesh: &Mesh, x: Point) -> Option<(usize, [f64; 3])> {
    (0..mesh.n_triangles()).find_map(|t| {
        let lam = ElementGeometry::new(mesh, t).barycentric(x);
        lam.iter().all(|&l| l >= -1e-12).then_some((t, lam))
    })
}
