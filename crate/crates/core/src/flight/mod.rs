//! Survey flights: cameras, crosshatch plans and wind jitter.

pub mod camera;
pub mod jitter;
pub mod plan;

use thiserror::Error;

pub use camera::{Camera, CameraFrame, CameraIntrinsics, CameraPose};
pub use jitter::apply_wind_jitter;
pub use plan::{plan_crosshatch, FlightLine, FlightPlan};

#[derive(Debug, Error)]
pub enum FlightError {
    #[error("invalid flight parameter: {0}")]
    InvalidParameter(String),
}
