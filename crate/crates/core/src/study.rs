//! Convergence studies and reproduction drivers.

use std::time::Instant;

use crate::adaptive::{self, AdaptiveHistory, LevelView, StopCriterion};
use crate::c0ip;
use crate::cases::{self, ManufacturedCase};
use crate::control::{self, Bounds, ControlKind, KktReport};
use crate::error::Result;
use crate::estimator::{self, EstimatorReport};
use crate::kkt::{self, Discretization, KktSolution, VdSolution, EXACT_DEGREE};
use crate::mesh::{make_lshape, make_unit_square, Diagonal, Mesh, Point};
use crate::p2::{self, ElementGeometry, P2Function};
use crate::quadrature;

/// `‖q - q_h‖_{L2(Ω)}` for piecewise constant `q_h` on triangles.
pub fn distributed_control_error(mesh: &Mesh, q_h: &[f64], q: impl Fn(Point) -> f64) -> f64 {
    let rule = quadrature::triangle(EXACT_DEGREE);
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        for (xi, w) in rule.iter() {
            let e = q(geo.map(xi)) - q_h[t];
            s += 2.0 * geo.area * w * e * e;
        }
    }
    s.sqrt()
}

/// True errors of a discrete solution against the manufactured case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueErrors {
    pub err_u: f64,
    pub err_phi: f64,
    pub err_q: f64,
}

impl TrueErrors {
    pub fn sum(&self) -> f64 {
        self.err_u + self.err_phi + self.err_q
    }
}

pub fn manufactured_errors(disc: &Discretization, case: &ManufacturedCase, u: &P2Function, phi: &P2Function, q_h: &[f64]) -> TrueErrors {
    let eu = c0ip::error_norms(&disc.mesh, &disc.dofs, &disc.traces, u, |p| case.u(p), |p| case.u_hessian(p), disc.spec.eta);
    let ep = c0ip::error_norms(&disc.mesh, &disc.dofs, &disc.traces, phi, |p| case.phi(p), |p| case.phi_hessian(p), disc.spec.eta);
    TrueErrors {
        err_u: eu.energy,
        err_phi: ep.energy,
        err_q: distributed_control_error(&disc.mesh, q_h, |p| case.q(p)),
    }
}

/// One row of a uniform convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub free_dofs: usize,
    pub errors: TrueErrors,
    pub eta_total: f64,
    pub efficiency: f64,
    pub pdas_iterations: usize,
    pub state_residual: f64,
    pub adjoint_residual: f64,
    pub seconds: f64,
}

pub struct Example1Level {
    pub row: ConvergenceRow,
    pub disc: Discretization,
    pub solution: KktSolution,
    pub report: EstimatorReport,
}

/// Solve the manufactured problem on the `n × n` square mesh.
pub fn example1_level(case: &ManufacturedCase, n: usize, diagonal: Diagonal) -> Result<Example1Level> {
    let start = Instant::now();
    let mesh = make_unit_square(n, diagonal)?;
    let disc = Discretization::new(&case.spec(), &mesh)?;
    let solution = kkt::solve_pdas(&disc, kkt::DEFAULT_MAX_PDAS)?;
    let errors = manufactured_errors(&disc, case, &solution.u, &solution.phi, &solution.q.values);
    let report = estimator::estimate(&disc, &solution.u, &solution.phi, &solution.q.values);
    Ok(Example1Level {
        row: ConvergenceRow {
            n,
            h: 1.0 / n as f64,
            free_dofs: disc.n_free(),
            errors,
            eta_total: report.eta_total,
            efficiency: estimator::efficiency_index(&report, &errors)?,
            pdas_iterations: solution.iterations,
            state_residual: solution.state_residual,
            adjoint_residual: solution.adjoint_residual,
            seconds: start.elapsed().as_secs_f64(),
        },
        disc,
        solution,
        report,
    })
}

/// `log₂(e_coarse / e_fine)`.
pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Uniform convergence table with orders between consecutive rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// `(order_u, order_phi, order_q)` of row `i` against row `i - 1`.
    pub fn orders(&self, i: usize) -> Option<(f64, f64, f64)> {
        if i == 0 || i >= self.rows.len() {
            return None;
        }
        let (c, f) = (&self.rows[i - 1].errors, &self.rows[i].errors);
        Some((order(c.err_u, f.err_u), order(c.err_phi, f.err_phi), order(c.err_q, f.err_q)))
    }

    pub fn row_for(&self, n: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// Example 1 on `make_unit_square(n)` for every `n` in `subdivisions`.
pub fn run_example1(case: &ManufacturedCase, subdivisions: &[usize], diagonal: Diagonal) -> Result<ConvergenceTable> {
    let mut rows = Vec::with_capacity(subdivisions.len());
    for &n in subdivisions {
        let level = example1_level(case, n, diagonal)?;
        log::info!("h = 1/{n}: {:?}", level.row.errors);
        rows.push(level.row);
    }
    Ok(ConvergenceTable { rows })
}

/// `4, 8, …, 2^(levels + 1)`.
pub fn halving_sequence(levels: usize) -> Vec<usize> {
    (0..levels).map(|k| 4 << k).collect()
}

/// Distance from `x` to a closed triangle.
pub fn point_triangle_distance(x: Point, tri: [Point; 3]) -> f64 {
    let cross = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let s = [cross(tri[0], tri[1], x), cross(tri[1], tri[2], x), cross(tri[2], tri[0], x)];
    if s.iter().all(|&v| v >= 0.0) || s.iter().all(|&v| v <= 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|i| {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let t = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1])).clamp(0.0, 1.0);
            let p = [a[0] + t * d[0], a[1] + t * d[1]];
            ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

pub const CORNER_RADIUS: f64 = 0.2;

/// Share of marked triangles touching the disk around the re-entrant corner,
/// next to the disk's share of the domain area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerStat {
    pub level: usize,
    pub marked_fraction: f64,
    pub area_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Example2Result {
    pub history: AdaptiveHistory,
    pub corner: Vec<CornerStat>,
    /// Meshes of the levels listed in `snapshot_levels`, with nodal `u_h`, `φ_h`,
    /// per-triangle `q_h` and marking aggregates.
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub level: usize,
    pub mesh: Mesh,
    /// Vertex values of `u_h` and `φ_h`.
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    /// Distributed control per triangle (zero for boundary control).
    pub q_cells: Vec<f64>,
    /// Boundary control as `(edge, value)`.
    pub q_edges: Vec<(usize, f64)>,
    pub indicators: Vec<f64>,
}

impl Snapshot {
    pub fn capture(level: usize, disc: &Discretization, sol: &KktSolution, report: &EstimatorReport) -> Self {
        let nv = disc.mesh.n_vertices();
        let (q_cells, q_edges) = match disc.spec.kind {
            ControlKind::Distributed => (sol.q.values.clone(), Vec::new()),
            ControlKind::Boundary => (
                vec![0.0; disc.mesh.n_triangles()],
                disc.space.entities.iter().copied().zip(sol.q.values.iter().copied()).collect(),
            ),
        };
        Snapshot {
            level,
            mesh: disc.mesh.clone(),
            u: sol.u.coeffs[..nv].to_vec(),
            phi: sol.phi.coeffs[..nv].to_vec(),
            q_cells,
            q_edges,
            indicators: report.aggregate.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example2Config {
    pub alpha: f64,
    pub bounds: Bounds,
    pub eta: f64,
    pub theta: f64,
    pub stop: StopCriterion,
    pub initial_subdivisions: usize,
    pub diagonal: Diagonal,
    /// Levels whose mesh and fields are kept; the final level always is.
    pub snapshot_levels: Vec<usize>,
}

impl Default for Example2Config {
    fn default() -> Self {
        Example2Config {
            alpha: cases::DEFAULT_ALPHA,
            bounds: Bounds {
                lower: cases::DEFAULT_LOWER,
                upper: cases::DEFAULT_UPPER,
            },
            eta: cases::DEFAULT_ETA,
            theta: cases::DEFAULT_THETA,
            stop: StopCriterion::default(),
            initial_subdivisions: 2,
            diagonal: Diagonal::Ne,
            snapshot_levels: Vec::new(),
        }
    }
}

/// Adaptive run on the L-shape with `f = 1`, `u_d = 1`.
pub fn run_example2(config: &Example2Config) -> Result<Example2Result> {
    run_example2_with(config, |_| ())
}

pub fn run_example2_with(config: &Example2Config, mut observe: impl FnMut(&LevelView<'_>)) -> Result<Example2Result> {
    let spec = cases::constant_data_spec(ControlKind::Distributed, config.alpha, config.bounds, config.eta);
    let mesh = make_lshape(config.initial_subdivisions, config.diagonal)?;
    let area = mesh.domain.area();
    let disk_in_domain = 0.75 * std::f64::consts::PI * CORNER_RADIUS * CORNER_RADIUS;
    let mut corner = Vec::new();
    let mut snapshots = Vec::new();
    let history = adaptive::run_adaptive_with(&spec, &mesh, config.theta, config.stop, None, |v| {
        observe(v);
        if let Some(marked) = v.marked {
            let near = marked
                .indices()
                .iter()
                .filter(|&&t| point_triangle_distance([0.0, 0.0], v.disc.mesh.corners(t)) <= CORNER_RADIUS)
                .count();
            corner.push(CornerStat {
                level: v.level,
                marked_fraction: near as f64 / marked.len() as f64,
                area_fraction: disk_in_domain / area,
            });
        }
        if config.snapshot_levels.contains(&v.level) || v.is_final {
            snapshots.push(Snapshot::capture(v.level, v.disc, v.solution, v.report));
        }
    })?;
    Ok(Example2Result {
        history,
        corner,
        snapshots,
    })
}

#[derive(Debug, Clone)]
pub struct BoundaryDemoReport {
    pub n_free: usize,
    pub kkt: KktReport,
    pub solution: KktSolution,
    pub report: EstimatorReport,
}

/// Boundary control on the unit square with `f = 1`, `u_d = 1`.
pub fn run_boundary_demo(alpha: f64, bounds: Bounds, eta: f64, n: usize, diagonal: Diagonal) -> Result<BoundaryDemoReport> {
    let spec = cases::constant_data_spec(ControlKind::Boundary, alpha, bounds, eta);
    let mesh = make_unit_square(n, diagonal)?;
    let disc = Discretization::new(&spec, &mesh)?;
    let solution = kkt::solve_pdas(&disc, kkt::DEFAULT_MAX_PDAS)?;
    let kkt = control::vi_residual(&disc.space, &solution.q, &disc.trace(&solution.phi), alpha);
    let report = estimator::estimate(&disc, &solution.u, &solution.phi, &solution.q.values);
    Ok(BoundaryDemoReport {
        n_free: disc.n_free(),
        kkt,
        solution,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VdRow {
    pub n: usize,
    pub h: f64,
    pub full: TrueErrors,
    pub vd_err_u: f64,
    pub vd_err_phi: f64,
    pub vd_err_q: f64,
    /// `‖q_h - q̃‖_{L2}` by the degree-8 rule.
    pub control_distance: f64,
    pub vd_iterations: usize,
    /// Largest `|q̃ - clamp(-B_hφ̃/α)|` over the sampled points.
    pub clamp_defect: f64,
}

/// `‖q - q̃‖`, `‖q_h - q̃‖` and the clamp defect at the degree-8 points.
fn vd_control_norms(disc: &Discretization, vd: &VdSolution, q_h: &[f64], q: impl Fn(Point) -> f64) -> (f64, f64, f64) {
    let rule = quadrature::triangle(EXACT_DEGREE);
    let (mut exact, mut discrete, mut defect) = (0.0, 0.0_f64, 0.0_f64);
    for t in 0..disc.mesh.n_triangles() {
        let geo = ElementGeometry::new(&disc.mesh, t);
        for (xi, w) in rule.iter() {
            let lam = p2::barycentric_from_reference(xi);
            let qt = vd.control_at(disc, t, lam);
            let expect = (-vd.phi.value_at(&disc.dofs, t, lam) / vd.alpha).clamp(vd.bounds.lower, vd.bounds.upper);
            defect = defect.max((qt - expect).abs());
            let jw = 2.0 * geo.area * w;
            exact += jw * (q(geo.map(xi)) - qt).powi(2);
            discrete += jw * (q_h[t] - qt).powi(2);
        }
    }
    (exact.sqrt(), discrete.sqrt(), defect)
}

/// Full discretization against variational discretization on Example 1 meshes.
pub fn run_vd_compare(case: &ManufacturedCase, subdivisions: &[usize], diagonal: Diagonal) -> Result<Vec<VdRow>> {
    let mut rows = Vec::new();
    for &n in subdivisions {
        let level = example1_level(case, n, diagonal)?;
        let disc = &level.disc;
        let vd = kkt::solve_variational(disc, kkt::DEFAULT_VD_TOL, kkt::DEFAULT_VD_MAX_ITER)?;
        let eu = c0ip::error_norms(&disc.mesh, &disc.dofs, &disc.traces, &vd.u, |p| case.u(p), |p| case.u_hessian(p), disc.spec.eta);
        let ep = c0ip::error_norms(&disc.mesh, &disc.dofs, &disc.traces, &vd.phi, |p| case.phi(p), |p| case.phi_hessian(p), disc.spec.eta);
        let (vd_err_q, control_distance, clamp_defect) = vd_control_norms(disc, &vd, &level.solution.q.values, |p| case.q(p));
        rows.push(VdRow {
            n,
            h: 1.0 / n as f64,
            full: level.row.errors,
            vd_err_u: eu.energy,
            vd_err_phi: ep.energy,
            vd_err_q,
            control_distance,
            vd_iterations: vd.iterations,
            clamp_defect,
        });
    }
    Ok(rows)
}
