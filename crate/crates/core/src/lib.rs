//! Estimation of lumped RC thermal-model parameters for buildings.
//!
//! The crate bundles:
//!
//! - [`rc`]: differentiable 1R1C / 2R2C simulators with a fixed-step Euler integrator,
//! - [`diff`]: a small define-by-run reverse-mode tape and an Adam optimizer,
//! - [`estimator`]: the neural estimator that maps 24-hour windows to parameters,
//!   trained through the simulator, with loss-weighted marginal selection and a
//!   pretrain / fine-tune regime,
//! - [`ga`]: a genetic-algorithm trajectory-fitting baseline,
//! - [`datagen`]: a synthetic building-fleet generator (weather, thermostat, truth model),
//! - [`eval`]: train/test splitting, 24-hour rolling forecasts, metrics and sweeps,
//! - [`cli`]: configuration and command drivers used by the `rcident` binary.
//!
//! See the `examples/` directory of this crate for one runnable program per capability.

pub mod cli;
pub mod datagen;
pub mod diff;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod ga;
pub mod rc;
pub mod seed;
pub mod series;

pub use error::{Error, Result};
pub use rc::{Forcings, ThermalParams, ThermalState, Topology};
pub use series::BuildingSeries;
