//! Polygon change-detection harness: stimulus generation, rasterization,
//! coarse-body observers and relative-area-change scoring.

pub mod cli;
pub mod error;
pub mod fsutil;
pub mod geometry;
pub mod metrics;
pub mod morphology;
pub mod observers;
pub mod raster;
pub mod report;
pub mod seed;
pub mod trials;

pub use error::{Error, GeometryError, Result};
