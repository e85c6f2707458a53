//! Pipeline orchestration behind the `aerosynth` command.

pub mod config;
pub mod manifest;
pub mod pipeline;

pub use config::RunConfig;
pub use manifest::RunManifest;
pub use pipeline::{run_stages, Stage};
