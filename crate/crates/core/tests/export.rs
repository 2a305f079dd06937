use std::fs;

use c0ip_control::adaptive::{run_adaptive, AdaptiveHistory, StopCriterion};
use c0ip_control::cases::{constant_data_spec, ManufacturedCase};
use c0ip_control::control::{Bounds, ControlKind};
use c0ip_control::export::{self, HISTORY_HEADER};
use c0ip_control::kkt::{self, Discretization};
use c0ip_control::mesh::{bisect, make_lshape, make_unit_square, Diagonal, Domain, MarkSet};
use c0ip_control::{estimator, study};

fn default_bounds() -> Bounds {
    Bounds::new(-750.0, -50.0).unwrap()
}

#[test]
fn empty_history_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/history.csv");
    export::write_history_csv(&path, &AdaptiveHistory::default()).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.trim_end(), HISTORY_HEADER.join(","));
}

#[test]
fn history_is_reproducible_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let spec = constant_data_spec(ControlKind::Distributed, 1e-3, default_bounds(), 10.0);
    let stop = StopCriterion { max_dofs: 1_500, max_levels: 6 };
    let mut files = Vec::new();
    for k in 0..2 {
        let h = run_adaptive(&spec, &make_lshape(2, Diagonal::Ne).unwrap(), 0.3, stop, None).unwrap();
        let path = dir.path().join(format!("h{k}.csv"));
        export::write_history_csv(&path, &h).unwrap();
        let rows: Vec<String> = fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect();
        files.push(rows);
    }
    assert_eq!(files[0], files[1]);
    assert!(files[0].len() > 2);
}

#[test]
fn convergence_csv_has_blank_first_orders() {
    let dir = tempfile::tempdir().unwrap();
    let table = study::run_example1(&ManufacturedCase::default(), &[2, 4], Diagonal::Ne).unwrap();
    let path = dir.path().join("c.csv");
    export::write_convergence_csv(&path, &table).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,err_u,order_u,err_phi,order_phi,err_q,order_q");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1].split(',').nth(2), Some(""));
    let h: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
    assert_eq!(h, 0.25);
}

#[test]
fn mesh_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let m0 = make_lshape(2, Diagonal::Nw).unwrap();
    let m = bisect(&m0, &MarkSet::new(vec![0, 5, 7])).unwrap();
    let stem = dir.path().join("mesh");
    export::write_mesh(&stem, &m).unwrap();
    let back = export::read_mesh(&stem, Domain::lshape()).unwrap();
    assert_eq!(back.vertices, m.vertices);
    assert_eq!(back.triangles, m.triangles);
    assert!(back.validate().is_ok());
}

#[test]
fn truncated_mesh_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("mesh");
    export::write_mesh(&stem, &make_unit_square(2, Diagonal::Ne).unwrap()).unwrap();
    let node = stem.with_extension("node");
    let text = fs::read_to_string(&node).unwrap();
    let cut: Vec<&str> = text.lines().take(4).collect();
    fs::write(&node, cut.join("\n")).unwrap();
    assert!(export::read_mesh(&stem, Domain::unit_square()).is_err());
}

#[test]
fn vtk_files_pass_structure_check() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ControlKind::Distributed, ControlKind::Boundary] {
        let spec = constant_data_spec(kind, 1e-3, default_bounds(), 10.0);
        let disc = Discretization::new(&spec, &make_unit_square(4, Diagonal::Ne).unwrap()).unwrap();
        let sol = kkt::solve_pdas(&disc, kkt::DEFAULT_MAX_PDAS).unwrap();
        let report = estimator::estimate(&disc, &sol.u, &sol.phi, &sol.q.values);
        let snap = study::Snapshot::capture(3, &disc, &sol, &report);
        let path = dir.path().join(format!("{kind:?}.vtk"));
        export::write_vtk(&path, &snap).unwrap();
        export::check_vtk(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version"));
    }
    let bad = dir.path().join("bad.vtk");
    fs::write(&bad, "# vtk DataFile Version 3.0\nbroken\nASCII\n").unwrap();
    assert!(export::check_vtk(&bad).is_err());
}

#[test]
fn estimator_csv_ends_with_total() {
    let dir = tempfile::tempdir().unwrap();
    let level = study::example1_level(&ManufacturedCase::default(), 4, Diagonal::Ne).unwrap();
    let path = dir.path().join("est.csv");
    export::write_estimator_csv(&path, &level.report).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), level.disc.mesh.n_triangles() + 2);
    let total: f64 = lines.last().unwrap().split(',').nth(7).unwrap().parse().unwrap();
    assert!((total - level.report.eta_total).abs() <= 1e-6 * total);
}
