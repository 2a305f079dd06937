//! Convergence studies for the C0 interior penalty optimal control solver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use log::info;

use c0ip_control::adaptive::{self, loglog_slope, StopCriterion};
use c0ip_control::cases::{self, ManufacturedCase};
use c0ip_control::control::{Bounds, ControlKind};
use c0ip_control::export;
use c0ip_control::mesh::{make_lshape, make_unit_square, Diagonal};
use c0ip_control::study::{self, Example2Config, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Problem {
    Distributed,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Square,
    Lshape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Manufactured solution on uniformly refined squares.
    Uniform,
    /// Dörfler marking with newest-vertex bisection.
    Adaptive,
    /// Full discretization against the variational discretization.
    VdCompare,
    /// Boundary control with f = 1, u_d = 1 on one square mesh.
    BoundaryDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DiagonalArg {
    Ne,
    Nw,
}

#[derive(Debug, Parser)]
#[command(name = "c0ip-bench", version, about = "Optimal control of the clamped plate with C0 interior penalty elements")]
struct Cli {
    #[arg(long, value_enum, default_value = "distributed")]
    problem: Problem,
    #[arg(long, value_enum, default_value = "square")]
    domain: DomainArg,
    #[arg(long, value_enum, default_value = "uniform")]
    mode: Mode,
    /// Uniform: number of meshes h = 1/4, 1/8, ...; adaptive: maximum level count.
    /// Boundary demo: subdivisions of the square.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value_t = cases::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = cases::DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = cases::DEFAULT_LOWER, allow_hyphen_values = true)]
    qmin: f64,
    #[arg(long, default_value_t = cases::DEFAULT_UPPER, allow_hyphen_values = true)]
    qmax: f64,
    #[arg(long, default_value_t = cases::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = adaptive::DEFAULT_MAX_DOFS)]
    max_dofs: usize,
    /// Subdivisions of the initial adaptive mesh.
    #[arg(long, default_value_t = 2)]
    initial: usize,
    #[arg(long, value_enum, default_value = "ne")]
    diagonal: DiagonalArg,
    /// Also write VTK files for these adaptive levels (the final level is always written).
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Cli {
    fn diagonal(&self) -> Diagonal {
        match self.diagonal {
            DiagonalArg::Ne => Diagonal::Ne,
            DiagonalArg::Nw => Diagonal::Nw,
        }
    }

    fn bounds(&self) -> Result<Bounds> {
        Ok(Bounds::new(self.qmin, self.qmax)?)
    }

    fn case(&self) -> Result<ManufacturedCase> {
        Ok(ManufacturedCase {
            alpha: self.alpha,
            bounds: self.bounds()?,
            eta: self.eta,
        })
    }

    fn kind(&self) -> ControlKind {
        match self.problem {
            Problem::Distributed => ControlKind::Distributed,
            Problem::Boundary => ControlKind::Boundary,
        }
    }

    fn require(&self, problem: Problem, domain: DomainArg) -> Result<()> {
        if self.problem != problem || self.domain != domain {
            bail!("mode {} needs --problem {} --domain {}", name(self.mode), name(problem), name(domain));
        }
        Ok(())
    }
}

fn name(v: impl ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn write_snapshot(out: &Path, name: &str, snap: &Snapshot) -> Result<()> {
    let vtk = out.join(format!("{name}.vtk"));
    export::write_vtk(&vtk, snap)?;
    export::check_vtk(&vtk)?;
    export::write_mesh(&out.join(name), &snap.mesh)?;
    Ok(())
}

fn uniform(cli: &Cli) -> Result<()> {
    cli.require(Problem::Distributed, DomainArg::Square)?;
    let case = cli.case()?;
    let mut rows = Vec::new();
    let mut finest = None;
    for n in study::halving_sequence(cli.levels.unwrap_or(5)) {
        let level = study::example1_level(&case, n, cli.diagonal())?;
        info!("h = 1/{n}: {:?}", level.row.errors);
        rows.push(level.row.clone());
        finest = Some(level);
    }
    let table = study::ConvergenceTable { rows };
    export::write_convergence_csv(&cli.out.join("convergence.csv"), &table)?;
    println!("{:>8} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>6}", "h", "N", "err_u", "order", "err_phi", "order", "err_q", "order", "pdas");
    for (i, r) in table.rows.iter().enumerate() {
        let o = table.orders(i).map_or(["-".into(), "-".into(), "-".into()], |(a, b, c)| [format!("{a:.4}"), format!("{b:.4}"), format!("{c:.4}")]);
        println!(
            "{:>8} {:>8} {:>12.4} {:>8} {:>12.4} {:>8} {:>12.4} {:>8} {:>6}",
            format!("1/{}", r.n),
            r.free_dofs,
            r.errors.err_u,
            o[0],
            r.errors.err_phi,
            o[1],
            r.errors.err_q,
            o[2],
            r.pdas_iterations
        );
    }
    if let Some(level) = finest {
        export::write_estimator_csv(&cli.out.join("estimator.csv"), &level.report)?;
        write_snapshot(&cli.out, "uniform_final", &Snapshot::capture(0, &level.disc, &level.solution, &level.report))?;
    }
    Ok(())
}

fn adaptive_run(cli: &Cli) -> Result<()> {
    let stop = StopCriterion {
        max_dofs: cli.max_dofs,
        max_levels: cli.levels.unwrap_or(adaptive::DEFAULT_MAX_LEVELS),
    };
    let (history, snapshots) = if cli.problem == Problem::Distributed && cli.domain == DomainArg::Lshape {
        let config = Example2Config {
            alpha: cli.alpha,
            bounds: cli.bounds()?,
            eta: cli.eta,
            theta: cli.theta,
            stop,
            initial_subdivisions: cli.initial,
            diagonal: cli.diagonal(),
            snapshot_levels: cli.snapshots.clone(),
        };
        let result = study::run_example2(&config)?;
        for c in &result.corner {
            info!("level {}: corner share of marks {:.3} (disk area share {:.4})", c.level, c.marked_fraction, c.area_fraction);
        }
        (result.history, result.snapshots)
    } else {
        let mesh = match cli.domain {
            DomainArg::Square => make_unit_square(cli.initial, cli.diagonal())?,
            DomainArg::Lshape => make_lshape(cli.initial, cli.diagonal())?,
        };
        let case = cli.case()?;
        let manufactured = cli.problem == Problem::Distributed && cli.domain == DomainArg::Square;
        let spec = if manufactured {
            case.spec()
        } else {
            cases::constant_data_spec(cli.kind(), cli.alpha, cli.bounds()?, cli.eta)
        };
        let mut snapshots = Vec::new();
        let history = adaptive::run_adaptive_with(&spec, &mesh, cli.theta, stop, manufactured.then_some(&case), |v| {
            if cli.snapshots.contains(&v.level) || v.is_final {
                snapshots.push(Snapshot::capture(v.level, v.disc, v.solution, v.report));
            }
        })?;
        (history, snapshots)
    };
    export::write_history_csv(&cli.out.join("history.csv"), &history)?;
    for s in &snapshots {
        write_snapshot(&cli.out, &format!("level_{:02}", s.level), s)?;
    }
    println!("{:>5} {:>8} {:>12} {:>12} {:>12} {:>6}", "level", "N", "eta_u", "eta_phi", "eta_total", "pdas");
    for r in &history.records {
        println!("{:>5} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>6}", r.level, r.n_free, r.eta_u, r.eta_phi, r.eta_total, r.pdas_iterations);
    }
    let tail = &history.records[history.records.len().saturating_sub(5)..];
    if tail.len() >= 2 {
        let n: Vec<f64> = tail.iter().map(|r| r.n_free as f64).collect();
        let eta: Vec<f64> = tail.iter().map(|r| r.eta_total).collect();
        println!("slope of eta_total over the last {} levels: {:.3}", tail.len(), loglog_slope(&n, &eta));
    }
    Ok(())
}

fn vd_compare(cli: &Cli) -> Result<()> {
    cli.require(Problem::Distributed, DomainArg::Square)?;
    let rows = study::run_vd_compare(&cli.case()?, &study::halving_sequence(cli.levels.unwrap_or(4)), cli.diagonal())?;
    export::write_vd_csv(&cli.out.join("vd_compare.csv"), &rows)?;
    println!("{:>8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6}", "h", "err_u", "vd_err_u", "err_q", "vd_err_q", "|q_h - q~|", "iters");
    for r in &rows {
        println!(
            "{:>8} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4e} {:>6}",
            format!("1/{}", r.n),
            r.full.err_u,
            r.vd_err_u,
            r.full.err_q,
            r.vd_err_q,
            r.control_distance,
            r.vd_iterations
        );
    }
    Ok(())
}

fn boundary_demo(cli: &Cli) -> Result<()> {
    cli.require(Problem::Boundary, DomainArg::Square)?;
    let n = cli.levels.unwrap_or(16);
    let demo = study::run_boundary_demo(cli.alpha, cli.bounds()?, cli.eta, n, cli.diagonal())?;
    let spec = cases::constant_data_spec(ControlKind::Boundary, cli.alpha, cli.bounds()?, cli.eta);
    let disc = c0ip_control::kkt::Discretization::new(&spec, &make_unit_square(n, cli.diagonal())?)?;
    export::write_estimator_csv(&cli.out.join("estimator.csv"), &demo.report)?;
    write_snapshot(&cli.out, "boundary", &Snapshot::capture(0, &disc, &demo.solution, &demo.report))?;
    let q = &demo.solution.q.values;
    println!("free dofs {}, PDAS iterations {}", demo.n_free, demo.solution.iterations);
    println!(
        "q_h in [{:.4}, {:.4}], {} lower / {} upper active edges of {}",
        q.iter().cloned().fold(f64::INFINITY, f64::min),
        q.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        demo.solution.lower_active.len(),
        demo.solution.upper_active.len(),
        q.len()
    );
    println!("KKT report satisfied: {}", demo.kkt.satisfied());
    println!("eta_total {:.4e}", demo.report.eta_total);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match cli.mode {
        Mode::Uniform => uniform(cli),
        Mode::Adaptive => adaptive_run(cli),
        Mode::VdCompare => vd_compare(cli),
        Mode::BoundaryDemo => boundary_demo(cli),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
