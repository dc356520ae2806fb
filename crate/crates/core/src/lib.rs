//! Optimization over data-defined manifolds through Tweedie's formula.

pub mod control;
pub mod error;
pub mod manifolds;
pub mod numerics;
pub mod io;
pub mod objectives;
pub mod optim;
pub mod rng;
pub mod score;
pub mod validation;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
