//! Forward-in-time parabolic chain geometry: cylinders of the parabolic
//! metric, FIT links and chains on discretized cylinder graphs, chain
//! distances, and numerical PBMO estimators.

pub mod analysis;
pub mod chain;
pub mod domain;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod oracle;
pub mod pbmo;
pub mod sampling;

pub use error::{Error, Result};
