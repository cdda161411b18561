//! Output-feedback VFO-ADR cascaded path-following control for
//! underactuated 6-DoF rigid-body vehicles, plus a deterministic batch
//! simulator.
//!
//! The library is organized around the control structure:
//!
//! - [`rigid_body`]: frame transforms and the ground-truth plant dynamics;
//! - [`path_geometry`]: non-parametrized paths as level-surface pairs with
//!   analytic derivatives;
//! - [`vfo_controller`]: the kinematic outer loop (convergence vector field,
//!   auxiliary orientation, commanded velocities, roll stabilizer);
//! - [`adr_controller`]: the dynamic inner loop (extended state observers
//!   and the disturbance-cancelling force law);
//! - [`simulation`]: closed-loop scenario execution, metrics and
//!   diagnostics;
//! - [`config`]: scenario configuration schema with the two reference
//!   scenarios.
//!
//! The controller side is strictly output-feedback: every controller
//! operation consumes the measured configuration, observer estimates and
//! path geometry; plant velocities appear only in the simulator.

pub mod adr_controller;
pub mod config;
pub mod errors;
pub mod path_geometry;
pub mod rigid_body;
pub mod simulation;
pub mod vfo_controller;

pub use errors::{Error, Result};
