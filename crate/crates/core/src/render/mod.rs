//! Ray casting: the triangle BVH and per-camera depth/label images.

pub mod bvh;
pub mod image;

use thiserror::Error;

pub use bvh::{build_bvh, Bvh, Hit, Nearest};
pub use image::{read_image, render, write_image, DepthLabelImage};

use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("cannot build a BVH over an empty mesh")]
    EmptyMesh,
    #[error("invalid camera intrinsics")]
    InvalidCamera,
    #[error(transparent)]
    Mesh(MeshError),
    #[error("image format: {0}")]
    Format(String),
}
