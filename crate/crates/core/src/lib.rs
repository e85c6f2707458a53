//! Synthetic aerial photogrammetry: labeled procedural scenes, simulated
//! survey flights and reconstructions, label transfer, point-cloud
//! processing and segmentation metrics.

pub mod annotate;
pub mod class;
pub mod eval;
pub mod cloud;
pub mod flight;
pub mod geom;
pub mod io;
pub mod mesh;
pub mod pcproc;
pub mod palette;
pub mod recon;
pub mod render;
pub mod rng;
pub mod scene;
pub mod spatial;

pub use class::{SemanticClass, UNLABELED};
pub use cloud::LabeledPointCloud;
pub use mesh::LabeledMesh;
