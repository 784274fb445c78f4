//! Numerical toolkit for a Gromov-hyperbolic metric on smooth bounded domains.

pub mod boundary;
pub mod complex;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod gromov;
pub mod kobayashi;
pub mod linalg;
pub mod metric;
pub mod search;

pub use error::{Error, Result};
pub use linalg::Point;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
