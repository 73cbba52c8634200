//! Simulation and analysis of spin squeezing in dipolar XY spin arrays.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dense;
pub mod error;
pub mod error_models;
pub mod krylov;
pub mod lattice;
pub mod measurement;
pub mod operators;
pub mod plot;
pub mod protocols;
pub mod rotor;
pub mod semiclassical;
pub mod state;

pub use error::{Error, Result};
