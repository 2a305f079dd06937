//! Conforming triangulations of polygonal domains with newest vertex
//! bisection and Dörfler marking.
//!
//! Triangles are stored as `[newest, b, c]` with counter-clockwise
//! orientation; the refinement edge of every triangle is its local edge 0,
//! i.e. the edge `(b, c)` opposite the newest vertex. Local edge `i` is always
//! the edge opposite local vertex `i`.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A simple polygon given by its corners in counter-clockwise order. Side `i`
/// runs from corner `i` to corner `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub corners: Vec<Point>,
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain {
            corners: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }

    /// `(-1, 1)^2` minus `[0, 1] x [-1, 0]`, re-entrant corner at the origin.
    pub fn lshape() -> Self {
        Domain {
            corners: vec![
                [-1.0, -1.0],
                [0.0, -1.0],
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [-1.0, 1.0],
            ],
        }
    }

    pub fn segment_count(&self) -> usize {
        self.corners.len()
    }

    pub fn area(&self) -> f64 {
        let n = self.corners.len();
        0.5 * (0..n)
            .map(|i| {
                let p = self.corners[i];
                let q = self.corners[(i + 1) % n];
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.corners.len();
        (0..n).map(|i| dist(self.corners[i], self.corners[(i + 1) % n])).sum()
    }

    /// Index of the side containing the segment `p`-`q`, if any.
    pub fn segment_of(&self, p: Point, q: Point) -> Option<usize> {
        let n = self.corners.len();
        let scale = self.perimeter();
        (0..n).find(|&i| {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % n];
            on_segment(a, b, p, 1e-12 * scale) && on_segment(a, b, q, 1e-12 * scale)
        })
    }

    /// Interior angle at each corner.
    pub fn interior_angles(&self) -> Vec<f64> {
        let n = self.corners.len();
        (0..n)
            .map(|i| {
                let prev = self.corners[(i + n - 1) % n];
                let cur = self.corners[i];
                let next = self.corners[(i + 1) % n];
                let u = [prev[0] - cur[0], prev[1] - cur[1]];
                let v = [next[0] - cur[0], next[1] - cur[1]];
                let cross = v[0] * u[1] - v[1] * u[0];
                let dot = u[0] * v[0] + u[1] * v[1];
                let a = cross.atan2(dot);
                if a < 0.0 {
                    a + 2.0 * PI
                } else {
                    a
                }
            })
            .collect()
    }
}

fn on_segment(a: Point, b: Point, p: Point, tol: f64) -> bool {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len = (ab[0] * ab[0] + ab[1] * ab[1]).sqrt();
    let cross = (ab[0] * ap[1] - ab[1] * ap[0]) / len;
    let t = (ab[0] * ap[0] + ab[1] * ap[1]) / (len * len);
    cross.abs() <= tol && t >= -tol && t <= 1.0 + tol
}

pub(crate) fn dist(p: Point, q: Point) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Direction of the diagonal splitting each grid square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// From the lower-left to the upper-right corner.
    #[default]
    Ne,
    /// From the lower-right to the upper-left corner.
    Nw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, smaller index first.
    pub vertices: [usize; 2],
    /// Adjacent triangles; the second is `None` on the boundary.
    pub triangles: (usize, Option<usize>),
    /// Side of the domain polygon a boundary edge lies on.
    pub boundary_segment: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles.1.is_none()
    }
}

/// Set of triangles selected for refinement: sorted, duplicate free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkSet(Vec<usize>);

impl MarkSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        MarkSet(indices)
    }

    pub fn all(count: usize) -> Self {
        MarkSet((0..count).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.0.binary_search(&t).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// `[newest, b, c]`, counter-clockwise, refinement edge `(b, c)`.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Global edge index of local edge `i` (opposite local vertex `i`).
    pub triangle_edges: Vec<[usize; 3]>,
    /// Number of bisections separating each triangle from the initial mesh.
    pub level: Vec<u32>,
    /// Triangle of the previous mesh each triangle was produced from.
    pub parent: Vec<Option<usize>>,
    pub domain: Domain,
    boundary_vertex: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMetrics {
    pub h_max: f64,
    pub min_angle: f64,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
}

impl Mesh {
    /// Build a mesh from raw triangles, fixing orientation and seeding every
    /// refinement edge as the longest edge (ties: smallest opposite vertex).
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, domain: Domain) -> Self {
        let triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .map(|t| seed_refinement_edge(&vertices, t))
            .collect();
        let n = triangles.len();
        Self::assemble(vertices, triangles, domain, vec![0; n], vec![None; n])
    }

    /// Build a mesh keeping each triangle's first vertex as its newest vertex.
    /// Clockwise triangles are reoriented without moving that vertex.
    pub fn from_raw(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, domain: Domain) -> Result<Self> {
        let count = triangles.len();
        let mut oriented = Vec::with_capacity(count);
        for (index, [a, b, c]) in triangles.into_iter().enumerate() {
            if [a, b, c].iter().any(|&v| v >= vertices.len()) || a == b || b == c || a == c {
                return Err(Error::InvalidTriangle { index, count });
            }
            let area2 = (vertices[b][0] - vertices[a][0]) * (vertices[c][1] - vertices[a][1])
                - (vertices[c][0] - vertices[a][0]) * (vertices[b][1] - vertices[a][1]);
            if area2 == 0.0 {
                return Err(Error::InvalidTriangle { index, count });
            }
            oriented.push(if area2 < 0.0 { [a, c, b] } else { [a, b, c] });
        }
        Ok(Self::assemble(vertices, oriented, domain, vec![0; count], vec![None; count]))
    }

    fn assemble(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        domain: Domain,
        level: Vec<u32>,
        parent: Vec<Option<usize>>,
    ) -> Self {
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 2);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                *slot = match lookup.get(&key) {
                    Some(&e) => {
                        debug_assert!(edges[e].triangles.1.is_none(), "edge shared by 3 triangles");
                        edges[e].triangles.1 = Some(t);
                        e
                    }
                    None => {
                        let e = edges.len();
                        lookup.insert(key, e);
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            triangles: (t, None),
                            boundary_segment: None,
                        });
                        e
                    }
                };
            }
            triangle_edges.push(local);
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for e in edges.iter_mut().filter(|e| e.triangles.1.is_none()) {
            let [a, b] = e.vertices;
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
            e.boundary_segment = domain.segment_of(vertices[a], vertices[b]);
        }
        Mesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            level,
            parent,
            domain,
            boundary_vertex,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_boundary())
    }

    /// Global index of the refinement edge of triangle `t`.
    pub fn refinement_edge(&self, t: usize) -> usize {
        self.triangle_edges[t][0]
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.corners(t);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(t).abs()
    }

    /// Element diameter, the longest edge.
    pub fn diameter(&self, t: usize) -> f64 {
        let [p, q, r] = self.corners(t);
        dist(p, q).max(dist(q, r)).max(dist(r, p))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [p, q, r] = self.corners(t);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    pub fn min_angle(&self, t: usize) -> f64 {
        let c = self.corners(t);
        (0..3)
            .map(|i| {
                let p = c[i];
                let q = c[(i + 1) % 3];
                let r = c[(i + 2) % 3];
                let u = [q[0] - p[0], q[1] - p[1]];
                let v = [r[0] - p[0], r[1] - p[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (dist(p, q) * dist(p, r));
                cos.clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn metrics(&self) -> MeshMetrics {
        MeshMetrics {
            h_max: (0..self.n_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max),
            min_angle: (0..self.n_triangles()).map(|t| self.min_angle(t)).fold(f64::INFINITY, f64::min),
            vertices: self.n_vertices(),
            edges: self.n_edges(),
            triangles: self.n_triangles(),
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Check orientation, conformity, boundary classification and the Euler
    /// relation. Returns a description of the first violation found.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for t in 0..self.n_triangles() {
            if self.signed_area(t) <= 0.0 {
                return Err(format!("triangle {t} has non-positive signed area"));
            }
        }
        let mut boundary_length = 0.0;
        for (i, e) in self.edges.iter().enumerate() {
            if e.is_boundary() {
                let [a, b] = e.vertices;
                match self.domain.segment_of(self.vertices[a], self.vertices[b]) {
                    Some(s) if Some(s) == e.boundary_segment => {}
                    _ => return Err(format!("edge {i} has one neighbour but is not on the domain boundary")),
                }
                boundary_length += self.edge_length(i);
            }
        }
        let perimeter = self.domain.perimeter();
        if (boundary_length - perimeter).abs() > 1e-10 * perimeter {
            return Err(format!("boundary length {boundary_length} differs from perimeter {perimeter}"));
        }
        let euler = self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64;
        if euler != 1 {
            return Err(format!("Euler characteristic {euler} != 1"));
        }
        let mut used = vec![false; self.n_vertices()];
        self.triangles.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(format!("vertex {v} belongs to no triangle"));
        }
        Ok(())
    }
}

fn seed_refinement_edge(vertices: &[Point], tri: [usize; 3]) -> [usize; 3] {
    let [a, b, c] = tri;
    let area2 = (vertices[b][0] - vertices[a][0]) * (vertices[c][1] - vertices[a][1])
        - (vertices[c][0] - vertices[a][0]) * (vertices[b][1] - vertices[a][1]);
    let tri = if area2 < 0.0 { [a, c, b] } else { [a, b, c] };
    // longest opposite edge; ties go to the smallest opposite vertex index
    let len = |i: usize| dist(vertices[tri[(i + 1) % 3]], vertices[tri[(i + 2) % 3]]);
    let mut best = 0;
    for i in 1..3 {
        let (li, lb) = (len(i), len(best));
        let tie = (li - lb).abs() <= 1e-12 * lb;
        if (!tie && li > lb) || (tie && tri[i] < tri[best]) {
            best = i;
        }
    }
    [tri[best], tri[(best + 1) % 3], tri[(best + 2) % 3]]
}

fn check_subdivisions(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::ZeroSubdivision)
    } else {
        Ok(())
    }
}

fn split_square(v00: usize, v10: usize, v01: usize, v11: usize, diagonal: Diagonal) -> [[usize; 3]; 2] {
    match diagonal {
        Diagonal::Ne => [[v00, v10, v11], [v00, v11, v01]],
        Diagonal::Nw => [[v00, v10, v01], [v10, v11, v01]],
    }
}

/// Uniform `n x n` grid on the unit square, each cell split by the same diagonal.
pub fn make_unit_square(n: usize, diagonal: Diagonal) -> Result<Mesh> {
    check_subdivisions(n)?;
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let h = 1.0 / n as f64;
    let vertices = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| [i as f64 * h, j as f64 * h]))
        .collect();
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.extend(split_square(id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1), diagonal));
        }
    }
    Ok(Mesh::from_triangles(vertices, triangles, Domain::unit_square()))
}

/// L-shaped domain made of three unit squares, each meshed as in
/// [`make_unit_square`].
pub fn make_lshape(n: usize, diagonal: Diagonal) -> Result<Mesh> {
    check_subdivisions(n)?;
    let m = 2 * n;
    let h = 1.0 / n as f64;
    // grid over (-1,1)^2 skipping cells of the lower right quadrant
    let cell_kept = |i: usize, j: usize| !(i >= n && j < n);
    let mut index = vec![usize::MAX; (m + 1) * (m + 1)];
    let mut vertices = Vec::new();
    for j in 0..=m {
        for i in 0..=m {
            let touches = [(i, j), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j.wrapping_sub(1))]
                .iter()
                .any(|&(ci, cj)| ci < m && cj < m && cell_kept(ci, cj));
            if touches {
                index[j * (m + 1) + i] = vertices.len();
                vertices.push([-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
            }
        }
    }
    let id = |i: usize, j: usize| index[j * (m + 1) + i];
    let mut triangles = Vec::new();
    for j in 0..m {
        for i in 0..m {
            if cell_kept(i, j) {
                triangles.extend(split_square(id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1), diagonal));
            }
        }
    }
    Ok(Mesh::from_triangles(vertices, triangles, Domain::lshape()))
}

/// Newest vertex bisection of every marked triangle plus the closure needed
/// to keep the mesh conforming.
pub fn bisect(mesh: &Mesh, marked: &MarkSet) -> Result<Mesh> {
    bisect_with_bound(mesh, marked, 2 * mesh.n_triangles())
}

pub fn bisect_with_bound(mesh: &Mesh, marked: &MarkSet, depth_bound: usize) -> Result<Mesh> {
    let nt = mesh.n_triangles();
    if let Some(&t) = marked.indices().iter().find(|&&t| t >= nt) {
        return Err(Error::InvalidTriangle { index: t, count: nt });
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }

    // Closure: a triangle with any bisected edge must bisect its refinement
    // edge. `depth` is the length of the forcing chain that marked each edge.
    let mut depth: Vec<Option<usize>> = vec![None; mesh.n_edges()];
    let mut queue = std::collections::VecDeque::new();
    for &t in marked.indices() {
        let e = mesh.refinement_edge(t);
        if depth[e].is_none() {
            depth[e] = Some(0);
            queue.push_back(e);
        }
    }
    while let Some(e) = queue.pop_front() {
        let d = depth[e].unwrap_or(0);
        let (t0, t1) = mesh.edges[e].triangles;
        for t in std::iter::once(t0).chain(t1) {
            let r = mesh.refinement_edge(t);
            if depth[r].is_none() {
                if d + 1 > depth_bound {
                    return Err(Error::ClosureDepth { bound: depth_bound });
                }
                depth[r] = Some(d + 1);
                queue.push_back(r);
            }
        }
    }

    let mut vertices = mesh.vertices.clone();
    let midpoint: Vec<Option<usize>> = mesh
        .edges
        .iter()
        .zip(&depth)
        .map(|(edge, d)| {
            d.map(|_| {
                let [a, b] = edge.vertices;
                let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
                vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                vertices.len() - 1
            })
        })
        .collect();

    let mut triangles = Vec::with_capacity(nt * 2);
    let mut level = Vec::with_capacity(nt * 2);
    let mut parent = Vec::with_capacity(nt * 2);
    for t in 0..nt {
        let [a, b, c] = mesh.triangles[t];
        let [e0, e1, e2] = mesh.triangle_edges[t];
        let lvl = mesh.level[t];
        let mut push = |tri: [usize; 3], l: u32| {
            triangles.push(tri);
            level.push(l);
            parent.push(Some(t));
        };
        let Some(m) = midpoint[e0] else {
            debug_assert!(midpoint[e1].is_none() && midpoint[e2].is_none());
            push([a, b, c], lvl);
            continue;
        };
        // first child [m, a, b] with refinement edge (a, b) = e2
        match midpoint[e2] {
            Some(m2) => {
                push([m2, m, a], lvl + 2);
                push([m2, b, m], lvl + 2);
            }
            None => push([m, a, b], lvl + 1),
        }
        // second child [m, c, a] with refinement edge (c, a) = e1
        match midpoint[e1] {
            Some(m1) => {
                push([m1, m, c], lvl + 2);
                push([m1, a, m], lvl + 2);
            }
            None => push([m, c, a], lvl + 1),
        }
    }
    Ok(Mesh::assemble(vertices, triangles, mesh.domain.clone(), level, parent))
}

/// Uniform refinement: every triangle bisected twice (one full NVB sweep of
/// all edges).
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let once = bisect(mesh, &MarkSet::all(mesh.n_triangles()))?;
    bisect(&once, &MarkSet::all(once.n_triangles()))
}

/// Greedy Dörfler marking: the smallest set of triangles, taken in order of
/// decreasing indicator (ties by index), carrying at least `theta` of the
/// total. Zero indicators are never marked.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Result<MarkSet> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::BadTheta(theta));
    }
    if let Some((index, &value)) = indicators.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::BadIndicator { index, value });
    }
    let total: f64 = indicators.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroIndicators);
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&i, &j| indicators[j].total_cmp(&indicators[i]).then(i.cmp(&j)));
    let target = theta * total;
    let mut acc = 0.0;
    let mut chosen = Vec::new();
    for i in order {
        if acc >= target || indicators[i] == 0.0 {
            break;
        }
        acc += indicators[i];
        chosen.push(i);
    }
    Ok(MarkSet::new(chosen))
}
