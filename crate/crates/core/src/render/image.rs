//! Depth and label images by ray casting.

use std::io::{Read, Write};

use rayon::prelude::*;

use super::bvh::Bvh;
use super::RenderError;
use crate::class::UNLABELED;
use crate::flight::{Camera, CameraIntrinsics, CameraPose};
use crate::mesh::LabeledMesh;

/// Per-pixel range along the pixel ray, class and instance, row-major.
/// Misses hold `+inf`, [`UNLABELED`] and 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthLabelImage {
    pub camera: Camera,
    pub depth: Vec<f64>,
    pub semantic: Vec<u8>,
    pub instance: Vec<u32>,
}

impl DepthLabelImage {
    pub fn width(&self) -> u32 {
        self.camera.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.camera.intrinsics.height
    }

    pub fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width() as usize + u as usize
    }

    pub fn hit_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }

    /// A pixel is a miss in every channel or in none.
    pub fn is_consistent(&self) -> bool {
        let n = self.camera.intrinsics.pixel_count();
        self.depth.len() == n
            && self.semantic.len() == n
            && self.instance.len() == n
            && (0..n).all(|i| {
                let miss = !self.depth[i].is_finite();
                miss == (self.semantic[i] == UNLABELED) && (!miss || self.instance[i] == 0)
            })
    }
}

/// Casts one ray through every pixel centre and records the nearest hit.
pub fn render(camera: &Camera, bvh: &Bvh, mesh: &LabeledMesh) -> Result<DepthLabelImage, RenderError> {
    if !camera.intrinsics.is_valid() {
        return Err(RenderError::InvalidCamera);
    }
    let frame = camera.frame();
    let (w, h) = (camera.intrinsics.width, camera.intrinsics.height);
    let rows: Vec<Vec<(f64, u8, u32)>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| match bvh.closest_hit(&frame.pixel_ray(u, v), 0.0, f64::INFINITY) {
                    Some(hit) => (
                        hit.t,
                        mesh.tri_semantic[hit.triangle].id(),
                        mesh.tri_instance[hit.triangle],
                    ),
                    None => (f64::INFINITY, UNLABELED, 0),
                })
                .collect()
        })
        .collect();
    let n = camera.intrinsics.pixel_count();
    let mut img = DepthLabelImage {
        camera: *camera,
        depth: Vec::with_capacity(n),
        semantic: Vec::with_capacity(n),
        instance: Vec::with_capacity(n),
    };
    for (d, s, i) in rows.into_iter().flatten() {
        img.depth.push(d);
        img.semantic.push(s);
        img.instance.push(i);
    }
    Ok(img)
}

const MAGIC: &[u8; 8] = b"AERODLI1";

/// Binary container, little-endian: magic, width and height (u32), the
/// camera block (focal, cx, cy, x, y, z, yaw, pitch, roll as f64), then the
/// depth plane as f32, the class plane as u8 and the instance plane as u32.
/// Depth is narrowed to f32 on disk.
pub fn write_image<W: Write>(mut w: W, img: &DepthLabelImage) -> std::io::Result<()> {
    let k = &img.camera.intrinsics;
    let p = &img.camera.pose;
    w.write_all(MAGIC)?;
    w.write_all(&k.width.to_le_bytes())?;
    w.write_all(&k.height.to_le_bytes())?;
    for x in [k.focal, k.cx, k.cy, p.position[0], p.position[1], p.position[2], p.yaw, p.pitch, p.roll] {
        w.write_all(&x.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(img.depth.len() * 9);
    for &d in &img.depth {
        buf.extend_from_slice(&(d as f32).to_le_bytes());
    }
    buf.extend_from_slice(&img.semantic);
    for &i in &img.instance {
        buf.extend_from_slice(&i.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_image<R: Read>(mut r: R) -> Result<DepthLabelImage, RenderError> {
    let bad = |m: &str| RenderError::Format(m.to_string());
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| RenderError::Format(e.to_string()))?;
    let header = 8 + 8 + 9 * 8;
    if bytes.len() < header || &bytes[..8] != MAGIC {
        return Err(bad("not a depth/label image"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (width, height) = (u32_at(8), u32_at(12));
    let f: Vec<f64> = (0..9).map(|i| f64_at(16 + 8 * i)).collect();
    let intrinsics = CameraIntrinsics { width, height, focal: f[0], cx: f[1], cy: f[2] };
    let pose = CameraPose { position: [f[3], f[4], f[5]], yaw: f[6], pitch: f[7], roll: f[8] };
    let n = intrinsics.pixel_count();
    if bytes.len() != header + 9 * n {
        return Err(bad("truncated or oversized image planes"));
    }
    let mut o = header;
    let depth = (0..n).map(|i| f32::from_le_bytes(bytes[o + 4 * i..o + 4 * i + 4].try_into().unwrap()) as f64).collect();
    o += 4 * n;
    let semantic = bytes[o..o + n].to_vec();
    o += n;
    let instance = (0..n).map(|i| u32_at(o + 4 * i)).collect();
    Ok(DepthLabelImage { camera: Camera::new(intrinsics, pose), depth, semantic, instance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::SemanticClass;
    use crate::geom::Vec3;
    use crate::render::build_bvh;

    fn ground_plane(half: f64) -> LabeledMesh {
        let mut m = LabeledMesh::new();
        m.push_quad(
            Vec3::new(-half, -half, 0.0),
            Vec3::new(half, -half, 0.0),
            Vec3::new(half, half, 0.0),
            Vec3::new(-half, half, 0.0),
            SemanticClass::Grass,
            0,
        );
        m
    }

    fn nadir(z: f64, w: u32, h: u32) -> Camera {
        Camera::new(CameraIntrinsics::from_hfov(w, h, 60.0), CameraPose::nadir([0.0, 0.0, z], 0.0))
    }

    #[test]
    fn centre_pixel_depth_over_plane() {
        let mesh = ground_plane(100.0);
        let bvh = build_bvh(&mesh).unwrap();
        let img = render(&nadir(10.0, 41, 31), &bvh, &mesh).unwrap();
        let c = img.index(20, 15);
        assert!((img.depth[c] - 10.0).abs() < 1e-6);
        assert_eq!(img.semantic[c], SemanticClass::Grass.id());
        assert!(img.is_consistent());
        assert_eq!(img.hit_count(), 41 * 31);
    }

    #[test]
    fn roof_depth_at_nadir_pixel() {
        let mut mesh = ground_plane(100.0);
        mesh.push_quad(
            Vec3::new(-5.0, -5.0, 6.0),
            Vec3::new(5.0, -5.0, 6.0),
            Vec3::new(5.0, 5.0, 6.0),
            Vec3::new(-5.0, 5.0, 6.0),
            SemanticClass::Building,
            3,
        );
        let bvh = build_bvh(&mesh).unwrap();
        let img = render(&nadir(60.0, 21, 21), &bvh, &mesh).unwrap();
        let c = img.index(10, 10);
        assert!((img.depth[c] - 54.0).abs() < 1e-6);
        assert_eq!(img.semantic[c], SemanticClass::Building.id());
        assert_eq!(img.instance[c], 3);
    }

    #[test]
    fn sky_is_all_misses() {
        let mesh = ground_plane(10.0);
        let bvh = build_bvh(&mesh).unwrap();
        let mut cam = nadir(50.0, 16, 12);
        cam.pose.pitch = std::f64::consts::FRAC_PI_2;
        let img = render(&cam, &bvh, &mesh).unwrap();
        assert_eq!(img.hit_count(), 0);
        assert!(img.semantic.iter().all(|&s| s == UNLABELED));
        assert!(img.is_consistent());
    }

    #[test]
    fn container_round_trip() {
        let mesh = ground_plane(5.0);
        let bvh = build_bvh(&mesh).unwrap();
        let img = render(&nadir(12.0, 24, 16), &bvh, &mesh).unwrap();
        assert!(img.hit_count() > 0 && img.hit_count() < 24 * 16);
        let mut buf = Vec::new();
        write_image(&mut buf, &img).unwrap();
        let back = read_image(&buf[..]).unwrap();
        assert_eq!(back.camera, img.camera);
        assert_eq!(back.semantic, img.semantic);
        assert_eq!(back.instance, img.instance);
        for (a, b) in back.depth.iter().zip(&img.depth) {
            assert!(a == b || (a - b).abs() <= 1e-6 * b.abs());
        }
        assert!(read_image(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn render_is_pure() {
        let mesh = ground_plane(5.0);
        let bvh = build_bvh(&mesh).unwrap();
        let cam = nadir(8.0, 24, 16);
        assert_eq!(render(&cam, &bvh, &mesh).unwrap(), render(&cam, &bvh, &mesh).unwrap());
    }
}
