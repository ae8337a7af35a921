//! Raster filtering toolkit for auditing geo-obfuscated camera locations.
//!
//! An analyst describes what a camera trap can see ("red soil near a steep
//! slope") as a filter expression. The expression is evaluated over
//! co-registered public rasters, optionally clipped by a park boundary or by
//! the obfuscation disk around a published coordinate, and the surviving
//! pixels are reported as a searchable area.
//!
//! Module map:
//!
//! * [`raster`], [`mask`], [`geotiff`]: grids, binary masks and GeoTIFF I/O.
//! * [`morphology`], [`distance`]: dilation, erosion, closing, proximity bands.
//! * [`geo`], [`geojson`]: polygon/disk rasterization and area accounting.
//! * [`facing`]: solar azimuth and camera-facing bearing filters.
//! * [`dsl`]: the filter expression language.
//! * [`scenario`]: scenario loading, obfuscation and synthetic data.

pub mod distance;
pub mod dsl;
pub mod error;
pub mod facing;
pub mod geo;
pub mod geojson;
pub mod geotiff;
pub mod mask;
pub mod morphology;
pub mod raster;
pub mod scenario;

pub use error::{Error, Result};
pub use mask::BitMask;
pub use raster::{CompareOp, Geotransform, GridF32, RasterStack};
