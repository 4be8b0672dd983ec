//! Three-field glioblastoma growth model: proliferative tumor `T`, necrosis `N`
//! and vasculature `Phi` on a square domain.
//!
//! The tumor diffuses with a vasculature-dependent coefficient `kappa1 P + 1`;
//! necrosis and vasculature are pointwise ODEs. Space is discretized with
//! mass-lumped P1 elements on a structured triangulation, time with an
//! uncoupled linear IMEX scheme that keeps the fields nonnegative.
//!
//! Modules:
//! - [`model`]: pointwise kinetics and adimensionalization
//! - [`mesh`]: structured mesh, lumped mass, stiffness assembly
//! - [`solver`]: time stepping, CG, homogeneous ODE mode
//! - [`metrics`]: ring / surface quotients, area, radius, integrals
//! - [`experiments`]: initial conditions, preset scenarios, sweeps
//! - [`io`]: config files, metrics CSV, snapshots

// Range checks are written as `!(x > 0.0)` on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use experiments::{
    scenario_ring_width, scenario_surface_regularity, sweep, Scenario, SweepResult, ZoneSpec,
};
pub use mesh::{Bounds, Diagonal, SparseSymmetricMatrix, StructuredTriMesh};
pub use metrics::{MetricsSample, DEFAULT_THRESHOLD};
pub use model::{DimensionalParameters, DimensionlessParameters, FieldTriple, ParamName};
pub use solver::{
    run, run_homogeneous, simulate, RunOutput, SimulationState, SolverConfig, Stepper,
};
