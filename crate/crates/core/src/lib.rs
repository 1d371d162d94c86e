//! Simulation laboratory for the multi-opinion Naming Game with committed minorities.
// `!(x >= 0.0)` is how parameters reject NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abm;
pub mod error;
pub mod io;
pub mod meanfield;
pub mod ode;
pub mod opinion;
pub mod recursive;
pub mod scenario;
pub mod symmetry;
pub mod sweep;

pub use error::{Error, Result};
