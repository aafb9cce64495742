//! Mean-field engine: overdamped ODEs for (n_a, x), limit-cycle detection,
//! cycle-averaged power, fixed-point stability and the operational boundary.

mod boundary;
mod fixed_points;
mod integrate;
mod regime;

pub use boundary::{
    beta_min, boundary_functions, inflection_points, operational_boundary, predicts_limit_cycle,
    BoundaryPoint, BETA_SCAN_MAX, BETA_TOL,
};
pub use fixed_points::{
    find_fixed_points, fixed_point_function, jacobian, FixedPoint, Stability, StabilityReport,
};
pub use integrate::{
    field_energy, instantaneous_power, rhs, simulate, simulate_adaptive, AdaptiveTrajectory,
    ClassicalState, ClassicalTrajectory,
};
pub use regime::{
    classify_regime, cycle_power, cycle_power_adaptive, loop_work, upward_crossings, CycleMetrics,
    ProbeConfig, Regime, DEFAULT_DT, DEFAULT_T_MAX, PERIOD_SPREAD,
};

/// Reference points in (g_κ, β) for the three regimes at the default parameters.
pub mod reference {
    pub const CASE_A: (f64, f64) = (2.0, 0.5);
    pub const CASE_B: (f64, f64) = (10.0, 1.5);
    pub const CASE_C: (f64, f64) = (1.0, 2.5);
}
