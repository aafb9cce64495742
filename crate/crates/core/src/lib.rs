//! Autonomous molecular optomechanical heat engine: semiclassical and
//! Lindblad-level models, thermodynamic diagnostics and phase-space fields.

pub mod classical;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod normalmodes;
pub mod phasespace;
pub mod quantum;

pub use error::{Error, Result};
pub use hilbert::{HilbertDims, Operator, SuperOperator, C64};
pub use model::EngineParams;
