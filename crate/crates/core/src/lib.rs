//! Bayesian reconstruction of a 2-D cooling-fin conductivity field from
//! boundary temperatures by Metropolis-Hastings, with normalized acceptance
//! rules and run diagnostics.

pub mod acceptance;
pub mod banded;
pub mod chain;
pub mod config;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod normalizers;
pub mod phantoms;
pub mod priors;
pub mod proposal;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use field::{BoundaryVector, ConductivityField, Field, TemperatureField};
pub use grid::GridSpec;
