//! Full quantum treatment: steady states, propagation, observables.

mod state;
mod converge;
mod evolve;
mod sector;
mod steady;
mod thermo;

pub use state::{coherent_amplitudes, g2, thermal_probabilities, DensityMatrix, POS_TOL, STATE_TOL};
pub use converge::{converge_dims, Axis, ConvergeOptions, ConvergenceReport, ConvergenceStep, Observable};
pub use evolve::{evolve, evolve_with, EvolveOptions, Evolution};
pub use sector::{solve_sectors, solve_sectors_with_budget, SectorModel, SectorState, DEFAULT_MEMORY_BUDGET};
pub use steady::{steady_state, SolveMethod, SteadyState};
pub use thermo::{adjoint_dissipator, generator_action, heat_currents, heat_currents_ops, reservoir_action, thermo_report, ThermoReport};

