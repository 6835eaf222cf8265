pub mod analysis;
pub mod charge;
pub mod config;
pub mod density;
pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fields;
pub mod flowmetrics;
pub mod geom;
pub mod params;
pub mod pointset;
pub mod quadrature;
pub mod registry;

pub use error::{Error, Result};
