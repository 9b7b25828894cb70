//! Simulation of a Schroedinger evolution on the motional states of a
//! trapped ion: trap eigenbasis, grid gate construction, state encoding,
//! interaction-picture propagation with optional heating, optimal control
//! of the driving field, and analysis of the resulting dynamics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod encoder;
pub mod error;
pub mod field;
pub mod gridsim;
pub mod io;
pub mod linalg;
pub mod oct;
pub mod propagator;
pub mod trap;
pub mod units;

pub use error::{Error, Result};
