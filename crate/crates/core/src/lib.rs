//! Two-dimensional shallow-water solver for overland flow on a raster
//! bed, built on a small stencil-skeleton parallel layer.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod boundary;
pub mod commands;
pub mod error;
pub mod flux;
pub mod io;
pub mod num;
pub mod reconstruction;
pub mod solver;
pub mod sources;
pub mod state;

pub use error::{Error, Result};
pub use num::Real;
pub use overland_skel as skel;

pub use boundary::{BoundaryCondition, BoundarySet};
pub use io::SimulationConfig;
pub use solver::{run_simulation, Gauge, RunPlan};
pub use sources::{FrictionLaw, RainForcing};
pub use state::GridGeometry;

pub type Scenario = solver::Scenario<f64>;
pub type Plan = solver::RunPlan<f64>;
pub type Report = solver::SimulationReport<f64>;
pub type Grid = state::GridGeometry<f64>;
pub type Topography = state::Topography<f64>;
pub type Boundaries = boundary::BoundarySet<f64>;
pub type GreenAmpt = sources::GreenAmptParams<f64>;
pub type DamBreak = analytic::DamBreak<f64>;
