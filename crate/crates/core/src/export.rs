//! CSV tables, plain-text meshes and legacy VTK files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::adaptive::AdaptiveHistory;
use crate::error::{Error, Result};
use crate::estimator::EstimatorReport;
use crate::mesh::{Domain, Mesh};
use crate::study::{ConvergenceTable, Snapshot, VdRow};

/// Scientific notation with seven significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub const CONVERGENCE_HEADER: [&str; 7] = ["h", "err_u", "order_u", "err_phi", "order_phi", "err_q", "order_q"];

pub fn write_convergence_csv(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    for (i, row) in table.rows.iter().enumerate() {
        let e = &row.errors;
        let (ou, op, oq) = match table.orders(i) {
            Some((a, b, c)) => (sci(a), sci(b), sci(c)),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([sci(row.h), sci(e.err_u), ou, sci(e.err_phi), op, sci(e.err_q), oq])?;
    }
    finish(w, path)
}

pub const HISTORY_HEADER: [&str; 11] = [
    "level",
    "N",
    "eta_u",
    "eta_phi",
    "eta_control",
    "eta_total",
    "err_u",
    "err_phi",
    "err_q",
    "pdas_iters",
    "seconds",
];

pub fn write_history_csv(path: &Path, history: &AdaptiveHistory) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(HISTORY_HEADER)?;
    for r in &history.records {
        let (eu, ep, eq) = match &r.errors {
            Some(e) => (sci(e.err_u), sci(e.err_phi), sci(e.err_q)),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            r.level.to_string(),
            r.n_free.to_string(),
            sci(r.eta_u),
            sci(r.eta_phi),
            sci(r.eta_control),
            sci(r.eta_total),
            eu,
            ep,
            eq,
            r.pdas_iterations.to_string(),
            sci(r.seconds),
        ])?;
    }
    finish(w, path)
}

/// One row per triangle with its marking aggregate, then a `total` row.
pub fn write_estimator_csv(path: &Path, report: &EstimatorReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["triangle", "aggregate", "element_u", "element_phi", "eta_u", "eta_phi", "eta_control", "eta_total"])?;
    for (t, a) in report.aggregate.iter().enumerate() {
        w.write_record([t.to_string(), sci(*a), sci(report.u.element[t]), sci(report.phi.element[t]), String::new(), String::new(), String::new(), String::new()])?;
    }
    w.write_record([
        "total".to_string(),
        sci(report.aggregate.iter().sum()),
        sci(report.u.element.iter().sum()),
        sci(report.phi.element.iter().sum()),
        sci(report.eta_u),
        sci(report.eta_phi),
        sci(report.eta_control),
        sci(report.eta_total),
    ])?;
    finish(w, path)
}

pub fn write_vd_csv(path: &Path, rows: &[VdRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "h",
        "err_u",
        "err_phi",
        "err_q",
        "vd_err_u",
        "vd_err_phi",
        "vd_err_q",
        "control_distance",
        "vd_iters",
    ])?;
    for r in rows {
        w.write_record([
            sci(r.h),
            sci(r.full.err_u),
            sci(r.full.err_phi),
            sci(r.full.err_q),
            sci(r.vd_err_u),
            sci(r.vd_err_phi),
            sci(r.vd_err_q),
            sci(r.control_distance),
            r.vd_iterations.to_string(),
        ])?;
    }
    finish(w, path)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Write `<stem>.node` (`index x y boundary`) and `<stem>.ele`
/// (`index newest a b`), each preceded by a count line. Coordinates are
/// printed in shortest round-trip form.
pub fn write_mesh(stem: &Path, mesh: &Mesh) -> Result<()> {
    let node = stem.with_extension("node");
    let ele = stem.with_extension("ele");
    let mut w = create(&node)?;
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| Error::io(p.clone(), e)
    };
    writeln!(w, "{} 2 0 1", mesh.n_vertices()).map_err(io(&node))?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        writeln!(w, "{i} {:?} {:?} {}", v[0], v[1], mesh.is_boundary_vertex(i) as u8).map_err(io(&node))?;
    }
    w.flush().map_err(io(&node))?;
    let mut w = create(&ele)?;
    writeln!(w, "{} 3 0", mesh.n_triangles()).map_err(io(&ele))?;
    for (i, t) in mesh.triangles.iter().enumerate() {
        writeln!(w, "{i} {} {} {}", t[0], t[1], t[2]).map_err(io(&ele))?;
    }
    w.flush().map_err(io(&ele))
}

fn data_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if !body.is_empty() {
            out.push(body.split_whitespace().map(str::to_owned).collect());
        }
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(path: &Path, tok: Option<&String>) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        reason: "missing field".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        reason: format!("cannot parse {tok:?}"),
    })
}

/// Inverse of [`write_mesh`].
pub fn read_mesh(stem: &Path, domain: Domain) -> Result<Mesh> {
    let node = stem.with_extension("node");
    let ele = stem.with_extension("ele");
    let nodes = data_lines(&node)?;
    let n: usize = parse(&node, nodes.first().and_then(|l| l.first()))?;
    if nodes.len() != n + 1 {
        return Err(Error::Parse {
            path: node,
            reason: format!("expected {n} vertices, found {}", nodes.len().saturating_sub(1)),
        });
    }
    let mut vertices = Vec::with_capacity(n);
    for l in &nodes[1..] {
        vertices.push([parse(&node, l.get(1))?, parse(&node, l.get(2))?]);
    }
    let eles = data_lines(&ele)?;
    let m: usize = parse(&ele, eles.first().and_then(|l| l.first()))?;
    if eles.len() != m + 1 {
        return Err(Error::Parse {
            path: ele,
            reason: format!("expected {m} triangles, found {}", eles.len().saturating_sub(1)),
        });
    }
    let mut triangles = Vec::with_capacity(m);
    for l in &eles[1..] {
        triangles.push([parse(&ele, l.get(1))?, parse(&ele, l.get(2))?, parse(&ele, l.get(3))?]);
    }
    Mesh::from_raw(vertices, triangles, domain)
}

const VTK_TRIANGLE: u8 = 5;
const VTK_LINE: u8 = 3;

/// Legacy ASCII VTK unstructured grid. Boundary controls become line cells;
/// cell arrays are zero on the cells they do not describe.
pub fn write_vtk(path: &Path, snap: &Snapshot) -> Result<()> {
    let mesh = &snap.mesh;
    let mut w = create(path)?;
    let err = |e| Error::io(path, e);
    let nt = mesh.n_triangles();
    let nl = snap.q_edges.len();
    let n_cells = nt + nl;
    writeln!(w, "# vtk DataFile Version 3.0").map_err(err)?;
    writeln!(w, "c0ip level {}", snap.level).map_err(err)?;
    writeln!(w, "ASCII\nDATASET UNSTRUCTURED_GRID").map_err(err)?;
    writeln!(w, "POINTS {} double", mesh.n_vertices()).map_err(err)?;
    for v in &mesh.vertices {
        writeln!(w, "{:?} {:?} 0", v[0], v[1]).map_err(err)?;
    }
    writeln!(w, "CELLS {n_cells} {}", 4 * nt + 3 * nl).map_err(err)?;
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2]).map_err(err)?;
    }
    for (e, _) in &snap.q_edges {
        let [a, b] = mesh.edges[*e].vertices;
        writeln!(w, "2 {a} {b}").map_err(err)?;
    }
    writeln!(w, "CELL_TYPES {n_cells}").map_err(err)?;
    for _ in 0..nt {
        writeln!(w, "{VTK_TRIANGLE}").map_err(err)?;
    }
    for _ in 0..nl {
        writeln!(w, "{VTK_LINE}").map_err(err)?;
    }
    let scalars = |w: &mut BufWriter<File>, name: &str, values: &mut dyn Iterator<Item = f64>| -> std::io::Result<()> {
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{}", sci(v))?;
        }
        Ok(())
    };
    writeln!(w, "POINT_DATA {}", mesh.n_vertices()).map_err(err)?;
    scalars(&mut w, "u", &mut snap.u.iter().copied()).map_err(err)?;
    scalars(&mut w, "phi", &mut snap.phi.iter().copied()).map_err(err)?;
    writeln!(w, "CELL_DATA {n_cells}").map_err(err)?;
    let zeros = std::iter::repeat(0.0).take(nl);
    scalars(&mut w, "q", &mut snap.q_cells.iter().copied().chain(snap.q_edges.iter().map(|(_, q)| *q))).map_err(err)?;
    scalars(&mut w, "indicator", &mut snap.indicators.iter().copied().chain(zeros)).map_err(err)?;
    w.flush().map_err(err)
}

/// Structural check of a legacy VTK unstructured grid as written by
/// [`write_vtk`]: section order, counts and index ranges.
pub fn check_vtk(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some("# vtk DataFile Version 3.0") {
        return Err(bad("missing version line".into()));
    }
    lines.next().ok_or_else(|| bad("missing title".into()))?;
    if lines.next() != Some("ASCII") || lines.next() != Some("DATASET UNSTRUCTURED_GRID") {
        return Err(bad("expected ASCII unstructured grid".into()));
    }
    let header = |line: Option<&str>, key: &str| -> Result<Vec<usize>> {
        let line = line.ok_or_else(|| bad(format!("missing {key}")))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(format!("expected {key}, found {line:?}")));
        }
        Ok(it.filter_map(|t| t.parse().ok()).collect())
    };
    let np = *header(lines.next(), "POINTS")?.first().ok_or_else(|| bad("POINTS count".into()))?;
    for _ in 0..np {
        let l = lines.next().ok_or_else(|| bad("truncated POINTS".into()))?;
        if l.split_whitespace().filter(|t| t.parse::<f64>().is_ok()).count() != 3 {
            return Err(bad(format!("bad point {l:?}")));
        }
    }
    let cells = header(lines.next(), "CELLS")?;
    let (nc, size) = (cells[0], cells[1]);
    let mut used = 0;
    for _ in 0..nc {
        let l = lines.next().ok_or_else(|| bad("truncated CELLS".into()))?;
        let ids: Vec<usize> = l.split_whitespace().map(|t| t.parse().map_err(|_| bad(format!("bad cell {l:?}")))).collect::<Result<_>>()?;
        if ids.is_empty() || ids[0] + 1 != ids.len() || ids[1..].iter().any(|&i| i >= np) {
            return Err(bad(format!("bad cell {l:?}")));
        }
        used += ids.len();
    }
    if used != size {
        return Err(bad(format!("CELLS size {size} but {used} entries")));
    }
    if header(lines.next(), "CELL_TYPES")?.first() != Some(&nc) {
        return Err(bad("CELL_TYPES count".into()));
    }
    for _ in 0..nc {
        let l = lines.next().ok_or_else(|| bad("truncated CELL_TYPES".into()))?;
        if !matches!(l.trim(), "3" | "5") {
            return Err(bad(format!("unsupported cell type {l:?}")));
        }
    }
    let rest: Vec<&str> = lines.map(str::trim).filter(|l| !l.is_empty()).collect();
    let mut i = 0;
    let mut count = None;
    while i < rest.len() {
        let l = rest[i];
        if let Some(n) = l.strip_prefix("POINT_DATA ") {
            if n.parse() != Ok(np) {
                return Err(bad("POINT_DATA count".into()));
            }
            count = Some(np);
            i += 1;
        } else if let Some(n) = l.strip_prefix("CELL_DATA ") {
            if n.parse() != Ok(nc) {
                return Err(bad("CELL_DATA count".into()));
            }
            count = Some(nc);
            i += 1;
        } else if l.starts_with("SCALARS ") {
            let n = count.ok_or_else(|| bad("SCALARS outside a data section".into()))?;
            if rest.get(i + 1) != Some(&"LOOKUP_TABLE default") {
                return Err(bad(format!("missing lookup table after {l:?}")));
            }
            let values = rest.get(i + 2..i + 2 + n).ok_or_else(|| bad(format!("truncated {l:?}")))?;
            if let Some(v) = values.iter().find(|v| v.parse::<f64>().map_or(true, |x| !x.is_finite())) {
                return Err(bad(format!("bad value {v:?} in {l:?}")));
            }
            i += 2 + n;
        } else {
            return Err(bad(format!("unexpected line {l:?}")));
        }
    }
    Ok(())
}
