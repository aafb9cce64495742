use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::sector::{solve_sectors_with_budget, SectorModel, DEFAULT_MEMORY_BUDGET};
use super::thermo::ThermoReport;
use crate::error::{Error, Result};
use crate::hilbert::HilbertDims;
use crate::model::{EngineParams, HBAR};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    MeanPhotons,
    PowerEq7,
    G2,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::MeanPhotons, Observable::PowerEq7, Observable::G2];

    fn value(self, r: &ThermoReport) -> f64 {
        match self {
            Observable::MeanPhotons => r.mean_photons,
            Observable::PowerEq7 => r.p_eq7,
            Observable::G2 => r.g2.unwrap_or(f64::NAN),
        }
    }

    /// Magnitude below which changes are measured absolutely.
    fn floor(self, p: &EngineParams) -> f64 {
        match self {
            Observable::PowerEq7 => 1e-6 * HBAR * p.omega_a * p.kappa0,
            _ => 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Cavity,
    Molecule,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceStep {
    pub n_cav: usize,
    pub n_mol: usize,
    /// Axis grown to reach this step; `None` for the starting point.
    pub refined: Option<Axis>,
    pub values: Vec<f64>,
    /// Largest relative change of any observable against the previous step.
    pub delta: Option<f64>,
    pub seconds: f64,
    pub report: ThermoReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub observables: Vec<Observable>,
    pub rtol: f64,
    pub converged: bool,
    pub steps: Vec<ConvergenceStep>,
}

impl ConvergenceReport {
    pub fn last(&self) -> Option<&ConvergenceStep> {
        self.steps.last()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConvergeOptions {
    pub rtol: f64,
    pub memory_budget: usize,
    pub max_refinements: usize,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        Self { rtol: 1e-3, memory_budget: DEFAULT_MEMORY_BUDGET, max_refinements: 16 }
    }
}

fn grow(n: usize) -> usize {
    ((n as f64 * 1.25).ceil() as usize).max(n + 1)
}

fn relative_change(obs: &[Observable], p: &EngineParams, old: &[f64], new: &[f64]) -> f64 {
    obs.iter()
        .zip(old.iter().zip(new))
        .map(|(o, (a, b))| {
            if a.is_nan() && b.is_nan() {
                0.0
            } else {
                (b - a).abs() / b.abs().max(o.floor(p))
            }
        })
        .fold(0.0, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) })
}

/// Grow the cavity and molecular truncations alternately by 25% until one
/// refinement of each leaves every observable within `rtol`.
pub fn converge_dims(
    p: &EngineParams,
    start: HilbertDims,
    observables: &[Observable],
    opts: ConvergeOptions,
) -> Result<(HilbertDims, ConvergenceReport)> {
    if !(opts.rtol > 0.0) {
        return Err(Error::InvalidParameter(format!("rtol must be positive, got {}", opts.rtol)));
    }
    let obs = if observables.is_empty() { Observable::ALL.to_vec() } else { observables.to_vec() };
    let mut report = ConvergenceReport { observables: obs.clone(), rtol: opts.rtol, converged: false, steps: Vec::new() };
    let mut dims = start;
    let mut refined = None;
    let mut last_delta = [None::<f64>; 2];
    for step in 0..=opts.max_refinements {
        let t0 = Instant::now();
        let required = SectorModel::memory_estimate(dims);
        if required > opts.memory_budget {
            return Err(Error::MemoryBudget {
                required,
                budget: opts.memory_budget,
                best: Some(Box::new(report)),
            });
        }
        let r = solve_sectors_with_budget(p, dims, opts.memory_budget)?.thermo_report()?;
        let values: Vec<f64> = obs.iter().map(|o| o.value(&r)).collect();
        let delta = report.steps.last().map(|s| relative_change(&obs, p, &s.values, &values));
        log::info!("converge_dims {}x{}: {:?} delta {:?}", dims.n_cav, dims.n_mol, values, delta);
        if let (Some(d), Some(ax)) = (delta, refined) {
            last_delta[ax as usize] = Some(d);
        }
        report.steps.push(ConvergenceStep {
            n_cav: dims.n_cav,
            n_mol: dims.n_mol,
            refined,
            values,
            delta,
            seconds: t0.elapsed().as_secs_f64(),
            report: r,
        });
        if last_delta.iter().all(|d| matches!(d, Some(v) if *v < opts.rtol)) {
            report.converged = true;
            return Ok((dims, report));
        }
        if step == opts.max_refinements {
            break;
        }
        let axis = if step % 2 == 0 { Axis::Cavity } else { Axis::Molecule };
        dims = match axis {
            Axis::Cavity => HilbertDims::new(grow(dims.n_cav), dims.n_mol)?,
            Axis::Molecule => HilbertDims::new(dims.n_cav, grow(dims.n_mol))?,
        };
        refined = Some(axis);
    }
    Ok((dims, report))
}
