//! Classical two-electron escape from an ion in a static electric field.
//!
//! The crate locates the field-induced saddle of the two-electron potential,
//! computes its stability exponents and the resulting threshold exponent, and
//! checks the power law for simultaneous double escape against ensembles of
//! fully integrated trajectories.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod model;
pub mod saddle;
pub mod threshold;

pub use error::{Error, Result};
pub use model::{PhaseState, SymmetricState, SystemParams};
