//! Bistable reaction-diffusion fronts in heterogeneous media.
//!
//! `u_t = div(b grad u) + s u (1 - u)(u - a)` on a rectangle with zero-flux
//! walls, where obstacles are cells of very small diffusivity `b`. The crate
//! builds obstacle geometries, integrates the equation with a finite-volume
//! RK4 scheme, classifies whether the front crosses, and evaluates the
//! reduced one-dimensional model that predicts blocking.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod radial;
pub mod solver;
pub mod sweep;

pub use config::{parse_config, Config};
pub use error::{Error, Result};
pub use field::{BistableParams, DiffusionMap, GridSpec, ScalarField};
pub use geometry::{Scenario, ScenarioKind, ScenarioSpec};
pub use solver::{run, Outcome, RunRecord, SolverConfig};
pub use sweep::{phase_boundary, run_sweep, OutcomeTable, SweepSpec};
