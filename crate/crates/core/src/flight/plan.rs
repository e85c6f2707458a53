//! Crosshatch survey planning.
//!
//! Pass 1 flies lawnmower lines along +x (heading 0), pass 2 the same
//! pattern along +y (heading 90 degrees). Along a line the stations are
//! `W_rows * (1 - forward_overlap)` apart, lines are `W_cols * (1 -
//! side_overlap)` apart, where `W` is the nadir ground footprint. The image
//! rows run along track, so the along-track footprint comes from the image
//! height. Stations and lines are centred on the area of interest and there
//! are `ceil(L / spacing) + 1` of each, which leaves every point of the area
//! inside at least one footprint per pass.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::camera::{Camera, CameraIntrinsics, CameraPose};
use super::FlightError;
use crate::geom::Rect;

/// Poses `start..start + len` of a plan form one straight line of `pass`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlightLine {
    pub pass: u8,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub intrinsics: CameraIntrinsics,
    pub poses: Vec<CameraPose>,
    pub aoi: Rect,
    /// Height above `base_elevation` (m).
    pub altitude: f64,
    pub base_elevation: f64,
    pub forward_overlap: f64,
    pub side_overlap: f64,
    /// Headings of the two passes, radians.
    pub passes: [f64; 2],
    pub lines: Vec<FlightLine>,
}

/// Altitudes outside this band are rejected rather than clamped.
pub const ALTITUDE_LIMITS: (f64, f64) = (1.0, 1000.0);

impl FlightPlan {
    pub fn cameras(&self) -> impl Iterator<Item = Camera> + '_ {
        self.poses.iter().map(move |p| Camera::new(self.intrinsics, *p))
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Along-track and cross-track spacing.
    pub fn spacing(&self) -> (f64, f64) {
        let (w_cols, w_rows) = self.intrinsics.footprint(self.altitude);
        (w_rows * (1.0 - self.forward_overlap), w_cols * (1.0 - self.side_overlap))
    }

    /// Moves the whole plan so the altitude is measured from `elevation`.
    pub fn with_base_elevation(mut self, elevation: f64) -> Self {
        let dz = elevation - self.base_elevation;
        for p in &mut self.poses {
            p.position[2] += dz;
        }
        self.base_elevation = elevation;
        self
    }
}

fn stations(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let n = ((hi - lo) / spacing).ceil() as usize + 1;
    let mid = 0.5 * (lo + hi);
    let first = mid - 0.5 * (n - 1) as f64 * spacing;
    (0..n).map(|i| first + i as f64 * spacing).collect()
}

pub fn plan_crosshatch(
    aoi: Rect,
    altitude: f64,
    forward_overlap: f64,
    side_overlap: f64,
    intrinsics: CameraIntrinsics,
) -> Result<FlightPlan, FlightError> {
    let bad = |m: String| Err(FlightError::InvalidParameter(m));
    if aoi.is_empty() || !aoi.width().is_finite() || !aoi.height().is_finite() {
        return bad(format!("area of interest {aoi:?} is empty"));
    }
    if !(altitude >= ALTITUDE_LIMITS.0 && altitude <= ALTITUDE_LIMITS.1) {
        return bad(format!("altitude {altitude} m outside {:?}", ALTITUDE_LIMITS));
    }
    for (name, o) in [("forward_overlap", forward_overlap), ("side_overlap", side_overlap)] {
        if !(0.0..1.0).contains(&o) {
            return bad(format!("{name} {o} must be in [0, 1)"));
        }
    }
    if !intrinsics.is_valid() {
        return bad("invalid camera intrinsics".into());
    }
    let mut plan = FlightPlan {
        intrinsics,
        poses: Vec::new(),
        aoi,
        altitude,
        base_elevation: 0.0,
        forward_overlap,
        side_overlap,
        passes: [0.0, FRAC_PI_2],
        lines: Vec::new(),
    };
    let (along, across) = plan.spacing();
    // Pass 1 along x, lines stacked in y; pass 2 along y, lines stacked in x.
    let passes = [
        (stations(aoi.min[0], aoi.max[0], along), stations(aoi.min[1], aoi.max[1], across)),
        (stations(aoi.min[1], aoi.max[1], along), stations(aoi.min[0], aoi.max[0], across)),
    ];
    for (pass, (track, offsets)) in passes.iter().enumerate() {
        let heading = plan.passes[pass];
        for (k, &offset) in offsets.iter().enumerate() {
            let start = plan.poses.len();
            let reverse = k % 2 == 1;
            let yaw = if reverse { heading + PI } else { heading };
            let order: Vec<f64> = if reverse { track.iter().rev().copied().collect() } else { track.clone() };
            for s in order {
                let (x, y) = if pass == 0 { (s, offset) } else { (offset, s) };
                plan.poses.push(CameraPose::nadir([x, y, altitude], yaw));
            }
            plan.lines.push(FlightLine { pass: pass as u8, start, len: track.len() });
        }
    }
    Ok(plan)
}
