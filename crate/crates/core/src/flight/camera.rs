//! Pinhole cameras.
//!
//! World frame is Z-up, right-handed. A pose's body frame has +x forward,
//! +y left and +z up; the rotation is `Rz(yaw) * Ry(-pitch) * Rx(roll)`, so
//! pitch -90 degrees looks straight down. The optical axis is body +x, image
//! columns grow along body -y and image rows along body -z: for a nadir
//! camera the top of the image points along the heading.
//!
//! Pixel `(u, v)` covers `[u, u+1) x [v, v+1)` and its ray passes through
//! the centre `(u + 0.5, v + 0.5)`.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::{Ray, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Focal length in pixels.
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    /// Centred principal point and the focal length giving `hfov_deg`
    /// across the image width.
    pub fn from_hfov(width: u32, height: u32, hfov_deg: f64) -> Self {
        let focal = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        CameraIntrinsics {
            width,
            height,
            focal,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0 && self.height > 0 && self.focal > 0.0 && self.focal.is_finite() && self.cx.is_finite() && self.cy.is_finite()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Ground footprint `(across columns, across rows)` of a nadir camera at
    /// `altitude` above a plane.
    pub fn footprint(&self, altitude: f64) -> (f64, f64) {
        (
            altitude * self.width as f64 / self.focal,
            altitude * self.height as f64 / self.focal,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl CameraPose {
    pub fn nadir(position: [f64; 3], yaw: f64) -> Self {
        CameraPose {
            position,
            yaw,
            pitch: -std::f64::consts::FRAC_PI_2,
            roll: 0.0,
        }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -self.pitch)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), self.roll)
    }

    pub fn origin(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

/// World-space basis of a camera, computed once per image.
#[derive(Clone, Copy, Debug)]
pub struct CameraFrame {
    pub origin: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub down: Vec3,
    pub intrinsics: CameraIntrinsics,
}

impl Camera {
    pub fn new(intrinsics: CameraIntrinsics, pose: CameraPose) -> Self {
        Camera { intrinsics, pose }
    }

    pub fn frame(&self) -> CameraFrame {
        let r = self.pose.rotation();
        CameraFrame {
            origin: self.pose.origin(),
            forward: r * Vec3::x(),
            right: -(r * Vec3::y()),
            down: -(r * Vec3::z()),
            intrinsics: self.intrinsics,
        }
    }
}

impl CameraFrame {
    /// Unit-direction ray through the centre of pixel `(u, v)`.
    #[inline]
    pub fn pixel_ray(&self, u: u32, v: u32) -> Ray {
        let k = &self.intrinsics;
        let x = (u as f64 + 0.5 - k.cx) / k.focal;
        let y = (v as f64 + 0.5 - k.cy) / k.focal;
        Ray::new(self.origin, (self.forward + self.right * x + self.down * y).normalize())
    }

    /// Continuous image coordinates and range of a world point, or `None`
    /// when it lies behind the camera.
    #[inline]
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let d = p - self.origin;
        let z = d.dot(&self.forward);
        if z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        let u = k.cx + k.focal * d.dot(&self.right) / z;
        let v = k.cy + k.focal * d.dot(&self.down) / z;
        Some((u, v, d.norm()))
    }

    /// `true` when `p` projects inside the image.
    #[inline]
    pub fn sees(&self, p: &Vec3) -> bool {
        match self.project(p) {
            Some((u, v, _)) => u >= 0.0 && v >= 0.0 && u < self.intrinsics.width as f64 && v < self.intrinsics.height as f64,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nadir_image_top_points_along_heading() {
        let k = CameraIntrinsics::from_hfov(101, 81, 60.0);
        let f = Camera::new(k, CameraPose::nadir([0.0, 0.0, 50.0], 0.0)).frame();
        assert!((f.forward - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((f.down - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((f.right - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        // Heading 90 degrees: image top points to +y.
        let g = Camera::new(k, CameraPose::nadir([0.0, 0.0, 50.0], std::f64::consts::FRAC_PI_2)).frame();
        assert!((g.down - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn project_inverts_pixel_ray() {
        let k = CameraIntrinsics::from_hfov(64, 48, 70.0);
        let pose = CameraPose { position: [3.0, -2.0, 40.0], yaw: 0.4, pitch: -1.2, roll: 0.05 };
        let f = Camera::new(k, pose).frame();
        for (u, v) in [(0, 0), (63, 47), (10, 30)] {
            let ray = f.pixel_ray(u, v);
            let p = ray.at(37.5);
            let (pu, pv, range) = f.project(&p).unwrap();
            assert!((pu - (u as f64 + 0.5)).abs() < 1e-9);
            assert!((pv - (v as f64 + 0.5)).abs() < 1e-9);
            assert!((range - 37.5).abs() < 1e-9);
        }
    }

    #[test]
    fn footprint_matches_fov() {
        let k = CameraIntrinsics::from_hfov(400, 400, 60.0);
        let (wx, wy) = k.footprint(60.0);
        let expect = 2.0 * 60.0 * 30f64.to_radians().tan();
        assert!((wx - expect).abs() < 1e-9 && (wy - expect).abs() < 1e-9);
        assert!((expect - 69.28).abs() < 5e-3);
    }
}
