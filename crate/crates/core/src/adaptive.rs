//! SOLVE → ESTIMATE → MARK → REFINE.

use std::time::Instant;

use log::{info, warn};

use crate::cases::ManufacturedCase;
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorReport};
use crate::kkt::{self, Discretization, KktSolution, ProblemSpec};
use crate::mesh::{bisect, dorfler_mark, MarkSet, Mesh, MeshMetrics};
use crate::p2::DofMap;
use crate::study::{self, TrueErrors};

pub const DEFAULT_MAX_DOFS: usize = 50_000;
pub const DEFAULT_MAX_LEVELS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopCriterion {
    /// No mesh with more free dofs than this is solved.
    pub max_dofs: usize,
    pub max_levels: usize,
}

impl Default for StopCriterion {
    fn default() -> Self {
        StopCriterion {
            max_dofs: DEFAULT_MAX_DOFS,
            max_levels: DEFAULT_MAX_LEVELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub n_free: usize,
    pub eta_u: f64,
    pub eta_phi: f64,
    pub eta_control: f64,
    pub eta_total: f64,
    pub errors: Option<TrueErrors>,
    pub pdas_iterations: usize,
    pub seconds: f64,
    pub metrics: MeshMetrics,
    /// Triangles marked on this level (zero when the level limit ends the run).
    pub marked: usize,
}

#[derive(Debug, Clone, Default)]
pub struct AdaptiveHistory {
    pub records: Vec<LevelRecord>,
}

/// Everything available on one level, handed to an observer before refinement.
pub struct LevelView<'a> {
    pub level: usize,
    pub disc: &'a Discretization,
    pub solution: &'a KktSolution,
    pub report: &'a EstimatorReport,
    /// `None` when the level limit leaves nothing to refine.
    pub marked: Option<&'a MarkSet>,
    /// No further level follows.
    pub is_final: bool,
}

pub fn run_adaptive(
    spec: &ProblemSpec,
    initial: &Mesh,
    theta: f64,
    stop: StopCriterion,
    exact: Option<&ManufacturedCase>,
) -> Result<AdaptiveHistory> {
    run_adaptive_with(spec, initial, theta, stop, exact, |_| ())
}

/// [`run_adaptive`] with a callback on every level.
pub fn run_adaptive_with(
    spec: &ProblemSpec,
    initial: &Mesh,
    theta: f64,
    stop: StopCriterion,
    exact: Option<&ManufacturedCase>,
    mut observe: impl FnMut(&LevelView<'_>),
) -> Result<AdaptiveHistory> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::BadTheta(theta));
    }
    if stop.max_dofs == 0 || stop.max_levels == 0 {
        return Err(Error::Config("stop criterion must be positive".into()));
    }
    spec.validate()?;
    let at = |level: usize| move |e: Error| Error::AtLevel { level, source: Box::new(e) };

    let mut history = AdaptiveHistory::default();
    let mut mesh = initial.clone();
    for level in 0..stop.max_levels {
        let start = Instant::now();
        let disc = Discretization::new(spec, &mesh).map_err(at(level))?;
        let solution = kkt::solve_pdas(&disc, kkt::DEFAULT_MAX_PDAS).map_err(at(level))?;
        let report = estimator::estimate(&disc, &solution.u, &solution.phi, &solution.q.values);
        let errors = exact.map(|c| study::manufactured_errors(&disc, c, &solution.u, &solution.phi, &solution.q.values));

        let last_level = level + 1 == stop.max_levels;
        let marked = if last_level { None } else { Some(dorfler_mark(&report.aggregate, theta).map_err(at(level))?) };
        let refined = match &marked {
            Some(m) => Some(bisect(&mesh, m).map_err(at(level))?),
            None => None,
        };
        let next = refined.filter(|m| DofMap::new(m).n_free() <= stop.max_dofs);
        let seconds = start.elapsed().as_secs_f64();

        observe(&LevelView {
            level,
            disc: &disc,
            solution: &solution,
            report: &report,
            marked: marked.as_ref(),
            is_final: next.is_none(),
        });
        if let Some(prev) = history.records.last() {
            if level >= 2 && report.eta_total > prev.eta_total {
                warn!("level {level}: estimator increased {:e} -> {:e}", prev.eta_total, report.eta_total);
            }
        }
        info!("level {level}: N = {}, eta = {:e}, {} PDAS iterations", disc.n_free(), report.eta_total, solution.iterations);
        history.records.push(LevelRecord {
            level,
            n_free: disc.n_free(),
            eta_u: report.eta_u,
            eta_phi: report.eta_phi,
            eta_control: report.eta_control,
            eta_total: report.eta_total,
            errors,
            pdas_iterations: solution.iterations,
            seconds,
            metrics: mesh.metrics(),
            marked: marked.as_ref().map_or(0, |m| m.len()),
        });

        match next {
            Some(m) => mesh = m,
            None => break,
        }
    }
    Ok(history)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
