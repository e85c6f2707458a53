//! Point-cloud post-processing.

pub mod downsample;
pub mod histogram;
pub mod mapping;
pub mod tiles;

use thiserror::Error;

pub use downsample::grid_downsample;
pub use histogram::{class_histogram, volume_density_histogram, ClassHistogram, DensityHistogram, DensityRegion};
pub use mapping::{map_classes, ClassMapping};
pub use tiles::{sample_fixed_count, sample_sphere, tile_blocks, Tile, TileBounds};

#[derive(Debug, Error)]
pub enum PcError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("class `{0}` has no entry in mapping `{1}`")]
    UnmappedClass(String, String),
    #[error("format error: {0}")]
    Format(String),
}
