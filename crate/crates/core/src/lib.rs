//! Simulation toolkit for log-gases and Ginibre-type point fields: static
//! samplers, windowed interacting diffusions, correlation estimators and
//! experiment drivers.

// `!(a < b)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod drift;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod potentials;
pub mod samplers;

pub use error::{Error, Result};
