//! Photogrammetry stand-in.
//!
//! Candidate points are drawn area-uniformly over the mesh at the saturated
//! density `density_per_view * view_cap`. A candidate seen by `k` cameras
//! (inside the frustum, facing the camera, unoccluded) survives with
//! probability `min(k, view_cap) / view_cap` when `k >= min_views`, so the
//! kept density is `density_per_view * min(k, view_cap)`. Survivors are
//! pushed along the surface normal by Gaussian noise, instances thinner than
//! `thin_dropout_width` lose points, and a fraction of points is replaced by
//! uniform outliers around the surface. The cloud carries no labels.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::SemanticClass;
use crate::cloud::LabeledPointCloud;
use crate::flight::{CameraFrame, FlightPlan};
use crate::geom::{Ray, Vec3};
use crate::mesh::LabeledMesh;
use crate::palette::instance_color;
use crate::render::{Bvh, DepthLabelImage};
use crate::rng::{chunk_seed, rng_from_seed};
use crate::scene::catalog::min_horizontal_width;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("flight plan has no cameras")]
    EmptyPlan,
    #[error("invalid reconstruction parameter: {0}")]
    InvalidParameter(String),
    #[error("images do not share one set of intrinsics")]
    MixedIntrinsics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Standard deviation of the displacement along the normal (m).
    pub surface_sigma: f64,
    pub outlier_rate: f64,
    pub outlier_radius: f64,
    pub min_views: u32,
    /// Views beyond this count add no density.
    pub view_cap: u32,
    /// Points per square metre per view.
    pub density_per_view: f64,
    pub thin_dropout_width: f64,
    pub dropout_prob: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            surface_sigma: 0.05,
            outlier_rate: 0.002,
            outlier_radius: 0.5,
            min_views: 2,
            view_cap: 2,
            density_per_view: 15.0,
            thin_dropout_width: 0.5,
            dropout_prob: 0.5,
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), ReconError> {
        let bad = |m: String| Err(ReconError::InvalidParameter(m));
        if !(self.surface_sigma >= 0.0 && self.surface_sigma.is_finite()) {
            return bad(format!("surface_sigma {}", self.surface_sigma));
        }
        for (name, v) in [("outlier_rate", self.outlier_rate), ("dropout_prob", self.dropout_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(self.outlier_radius >= 0.0) || !(self.thin_dropout_width >= 0.0) {
            return bad("outlier_radius and thin_dropout_width must be non-negative".into());
        }
        if self.min_views < 1 || self.view_cap < 1 {
            return bad("min_views and view_cap must be at least 1".into());
        }
        if !(self.density_per_view > 0.0 && self.density_per_view.is_finite()) {
            return bad(format!("density_per_view {}", self.density_per_view));
        }
        Ok(())
    }
}

/// Provenance of every output point, for evaluation only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReconTrace {
    pub source_triangle: Vec<u32>,
    pub outlier: Vec<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconStats {
    pub candidates: usize,
    pub visible: usize,
    pub thin_dropped: usize,
    pub outliers: usize,
    pub kept: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Reconstruction {
    pub cloud: LabeledPointCloud,
    pub trace: ReconTrace,
    pub stats: ReconStats,
}

const CHUNK_TRIANGLES: usize = 2048;
const CELL: f64 = 10.0;

/// Cameras indexed by the XY cells their frustum can reach between the
/// lowest and highest scene points.
struct CameraGrid {
    frames: Vec<CameraFrame>,
    cells: HashMap<(i64, i64), Vec<u32>>,
    everywhere: Vec<u32>,
}

impl CameraGrid {
    fn new(plan: &FlightPlan, z_lo: f64, z_hi: f64) -> Self {
        let frames: Vec<CameraFrame> = plan.cameras().map(|c| c.frame()).collect();
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let mut everywhere = Vec::new();
        for (i, f) in frames.iter().enumerate() {
            let k = &f.intrinsics;
            let corners = [(0.0, 0.0), (k.width as f64, 0.0), (0.0, k.height as f64), (k.width as f64, k.height as f64)];
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            let mut bounded = true;
            for (u, v) in corners {
                let d = f.forward + f.right * ((u - k.cx) / k.focal) + f.down * ((v - k.cy) / k.focal);
                for z in [z_lo, z_hi] {
                    let t = (z - f.origin.z) / d.z;
                    if !(t > 0.0 && t.is_finite()) || d.z >= 0.0 {
                        bounded = false;
                        continue;
                    }
                    let p = f.origin + d * t;
                    lo = [lo[0].min(p.x), lo[1].min(p.y)];
                    hi = [hi[0].max(p.x), hi[1].max(p.y)];
                }
            }
            if !bounded {
                everywhere.push(i as u32);
                continue;
            }
            for gx in (lo[0] / CELL).floor() as i64..=(hi[0] / CELL).floor() as i64 {
                for gy in (lo[1] / CELL).floor() as i64..=(hi[1] / CELL).floor() as i64 {
                    cells.entry((gx, gy)).or_default().push(i as u32);
                }
            }
        }
        CameraGrid { frames, cells, everywhere }
    }

    /// Cameras that see `p` from the front side of `normal`, unoccluded,
    /// counted up to `cap`.
    fn count_views(&self, p: &Vec3, normal: &Vec3, bvh: &Bvh, eps: f64, cap: u32) -> u32 {
        let key = ((p.x / CELL).floor() as i64, (p.y / CELL).floor() as i64);
        let local = self.cells.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        let mut views = 0;
        // Both lists are ascending; merging keeps the visiting order fixed.
        let mut a = local.iter().peekable();
        let mut b = self.everywhere.iter().peekable();
        loop {
            let next = match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) if x <= y => a.next(),
                (Some(_), Some(_)) => b.next(),
                (Some(_), None) => a.next(),
                (None, Some(_)) => b.next(),
                (None, None) => None,
            };
            let Some(&ci) = next else { break };
            let f = &self.frames[ci as usize];
            let to_cam = f.origin - p;
            if to_cam.dot(normal) <= 0.0 || !f.sees(p) {
                continue;
            }
            let origin = p + normal * eps;
            let dir = f.origin - origin;
            let dist = dir.norm();
            if bvh.occluded(&Ray::new(origin, dir / dist), 0.0, dist) {
                continue;
            }
            views += 1;
            if views >= cap {
                break;
            }
        }
        views
    }
}

/// Instances whose minimum horizontal width is below `width`.
pub fn thin_instances(mesh: &LabeledMesh, width: f64) -> Vec<u32> {
    let mut verts: BTreeMap<u32, Vec<Vec3>> = BTreeMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let inst = mesh.tri_instance[t];
        if inst == 0 || mesh.tri_semantic[t] == SemanticClass::Building || mesh.tri_semantic[t] == SemanticClass::Window {
            continue;
        }
        let e = verts.entry(inst).or_default();
        e.extend(tri.iter().map(|&i| mesh.vertices[i as usize]));
    }
    verts
        .into_iter()
        .filter(|(_, v)| min_horizontal_width(v.iter()) < width)
        .map(|(i, _)| i)
        .collect()
}

fn sample_triangle<R: Rng>(rng: &mut R, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let r1: f64 = rng.random();
    let r2: f64 = rng.random();
    let s = r1.sqrt();
    a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
}

fn sample_ball<R: Rng>(rng: &mut R, radius: f64) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        if v.norm_squared() <= 1.0 {
            return v * radius;
        }
    }
}

struct ChunkOut {
    points: Vec<(Vec3, u32, bool)>,
    stats: ReconStats,
}

pub fn simulate_reconstruction(mesh: &LabeledMesh, bvh: &Bvh, plan: &FlightPlan, params: &NoiseParams) -> Result<Reconstruction, ReconError> {
    params.validate()?;
    if plan.is_empty() {
        return Err(ReconError::EmptyPlan);
    }
    let bounds = mesh.bounds();
    let grid = CameraGrid::new(plan, bounds.min.z, bounds.max.z);
    let thin: std::collections::HashSet<u32> = thin_instances(mesh, params.thin_dropout_width).into_iter().collect();
    let cap = params.view_cap;
    let max_density = params.density_per_view * cap as f64;
    let eps = 1e-4 * (1.0 + bounds.extent().amax() * 1e-3);
    let noise = Normal::new(0.0, params.surface_sigma).expect("validated sigma");
    let n_chunks = mesh.triangle_count().div_ceil(CHUNK_TRIANGLES);

    let chunks: Vec<ChunkOut> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = rng_from_seed(chunk_seed(params.seed, ci as u64));
            let mut out = ChunkOut { points: Vec::new(), stats: ReconStats::default() };
            let lo = ci * CHUNK_TRIANGLES;
            let hi = (lo + CHUNK_TRIANGLES).min(mesh.triangle_count());
            for t in lo..hi {
                let [a, b, c] = mesh.triangle_vertices(t);
                let expected = mesh.triangle_area(t) * max_density;
                let mut n = expected.floor() as usize;
                if rng.random::<f64>() < expected - n as f64 {
                    n += 1;
                }
                if n == 0 {
                    continue;
                }
                let normal = mesh.triangle_normal(t);
                let is_thin = thin.contains(&mesh.tri_instance[t]);
                for _ in 0..n {
                    out.stats.candidates += 1;
                    let p = sample_triangle(&mut rng, &a, &b, &c);
                    let keep_u: f64 = rng.random();
                    let views = grid.count_views(&p, &normal, bvh, eps, cap.max(params.min_views));
                    if views < params.min_views {
                        continue;
                    }
                    if keep_u >= views.min(cap) as f64 / cap as f64 {
                        continue;
                    }
                    out.stats.visible += 1;
                    if is_thin && rng.random::<f64>() < params.dropout_prob {
                        out.stats.thin_dropped += 1;
                        continue;
                    }
                    if rng.random::<f64>() < params.outlier_rate {
                        out.stats.outliers += 1;
                        out.points.push((p + sample_ball(&mut rng, params.outlier_radius), t as u32, true));
                    } else {
                        let d = if params.surface_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                        out.points.push((p + normal * d, t as u32, false));
                    }
                }
            }
            out
        })
        .collect();

    let total: usize = chunks.iter().map(|c| c.points.len()).sum();
    let mut rec = Reconstruction {
        cloud: LabeledPointCloud::with_capacity(total, true),
        trace: ReconTrace { source_triangle: Vec::with_capacity(total), outlier: Vec::with_capacity(total) },
        stats: ReconStats::default(),
    };
    for c in chunks {
        rec.stats.candidates += c.stats.candidates;
        rec.stats.visible += c.stats.visible;
        rec.stats.thin_dropped += c.stats.thin_dropped;
        rec.stats.outliers += c.stats.outliers;
        for (p, t, outlier) in c.points {
            let color = instance_color(mesh.tri_semantic[t as usize], mesh.tri_instance[t as usize], params.seed);
            rec.cloud.push(p, Some(color), crate::class::UNLABELED, 0);
            rec.trace.source_triangle.push(t);
            rec.trace.outlier.push(outlier);
        }
    }
    rec.stats.kept = rec.cloud.len();
    log::info!(
        "reconstruction: {} candidates, {} visible, {} kept ({} outliers, {} thin dropouts)",
        rec.stats.candidates,
        rec.stats.visible,
        rec.stats.kept,
        rec.stats.outliers,
        rec.stats.thin_dropped
    );
    Ok(rec)
}

/// Inverse projection of every hit pixel, labels carried over.
pub fn backproject_proxy(images: &[DepthLabelImage]) -> Result<LabeledPointCloud, ReconError> {
    if let Some(first) = images.first() {
        if images.iter().any(|i| i.camera.intrinsics != first.camera.intrinsics) {
            return Err(ReconError::MixedIntrinsics);
        }
    }
    let mut cloud = LabeledPointCloud::new();
    for img in images {
        let frame = img.camera.frame();
        for v in 0..img.height() {
            for u in 0..img.width() {
                let i = img.index(u, v);
                let d = img.depth[i];
                if d.is_finite() {
                    cloud.push(frame.pixel_ray(u, v).at(d), None, img.semantic[i], img.instance[i]);
                }
            }
        }
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::{plan_crosshatch, CameraIntrinsics};
    use crate::geom::Rect;
    use crate::render::{build_bvh, render};

    fn plane(half: f64, z: f64) -> LabeledMesh {
        let mut m = LabeledMesh::new();
        m.push_quad(
            Vec3::new(-half, -half, z),
            Vec3::new(half, -half, z),
            Vec3::new(half, half, z),
            Vec3::new(-half, half, z),
            SemanticClass::Grass,
            0,
        );
        m
    }

    fn survey(half: f64) -> FlightPlan {
        plan_crosshatch(Rect::new([-half, -half], [half, half]), 40.0, 0.6, 0.6, CameraIntrinsics::from_hfov(64, 48, 70.0)).unwrap()
    }

    #[test]
    fn noiseless_points_lie_on_the_surface() {
        let mesh = plane(10.0, 2.0);
        let bvh = build_bvh(&mesh).unwrap();
        let params = NoiseParams { surface_sigma: 0.0, outlier_rate: 0.0, ..Default::default() };
        let rec = simulate_reconstruction(&mesh, &bvh, &survey(10.0), &params).unwrap();
        assert!(rec.cloud.len() > 1000);
        assert!(rec.cloud.positions.iter().all(|p| (p.z - 2.0).abs() < 1e-6));
        assert_eq!(rec.cloud.unlabeled_count(), rec.cloud.len());
    }

    #[test]
    fn unsatisfiable_views_give_an_empty_cloud() {
        let mesh = plane(10.0, 0.0);
        let bvh = build_bvh(&mesh).unwrap();
        let plan = survey(10.0);
        let params = NoiseParams { min_views: plan.len() as u32 + 1, ..Default::default() };
        let rec = simulate_reconstruction(&mesh, &bvh, &plan, &params).unwrap();
        assert!(rec.cloud.is_empty());
    }

    #[test]
    fn empty_plan_is_an_error() {
        let mesh = plane(10.0, 0.0);
        let bvh = build_bvh(&mesh).unwrap();
        let mut plan = survey(10.0);
        plan.poses.clear();
        assert!(matches!(
            simulate_reconstruction(&mesh, &bvh, &plan, &NoiseParams::default()),
            Err(ReconError::EmptyPlan)
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let mesh = plane(8.0, 0.0);
        let bvh = build_bvh(&mesh).unwrap();
        let plan = survey(8.0);
        let p = NoiseParams { seed: 5, ..Default::default() };
        let a = simulate_reconstruction(&mesh, &bvh, &plan, &p).unwrap();
        assert_eq!(a, simulate_reconstruction(&mesh, &bvh, &plan, &p).unwrap());
        let b = simulate_reconstruction(&mesh, &bvh, &plan, &NoiseParams { seed: 6, ..p }).unwrap();
        assert_ne!(a.cloud.positions, b.cloud.positions);
    }

    #[test]
    fn backprojection_round_trip() {
        let mesh = plane(30.0, 1.5);
        let bvh = build_bvh(&mesh).unwrap();
        let plan = survey(5.0);
        let images: Vec<_> = plan.cameras().take(2).map(|c| render(&c, &bvh, &mesh).unwrap()).collect();
        let cloud = backproject_proxy(&images).unwrap();
        assert_eq!(cloud.len(), images.iter().map(|i| i.hit_count()).sum::<usize>());
        assert!(cloud.positions.iter().all(|p| (p.z - 1.5).abs() < 1e-6));
        assert!(cloud.semantic.iter().all(|&s| s == SemanticClass::Grass.id()));
    }

    #[test]
    fn no_hit_images_give_an_empty_cloud() {
        let mesh = plane(1.0, 0.0);
        let bvh = build_bvh(&mesh).unwrap();
        let mut cam = survey(5.0).cameras().next().unwrap();
        cam.pose.pitch = 1.0;
        let img = render(&cam, &bvh, &mesh).unwrap();
        assert!(backproject_proxy(&[img]).unwrap().is_empty());
    }

    #[test]
    fn mixed_intrinsics_are_rejected() {
        let mesh = plane(5.0, 0.0);
        let bvh = build_bvh(&mesh).unwrap();
        let mut cams: Vec<_> = survey(5.0).cameras().take(2).collect();
        cams[1].intrinsics.focal *= 2.0;
        let imgs: Vec<_> = cams.iter().map(|c| render(c, &bvh, &mesh).unwrap()).collect();
        assert!(matches!(backproject_proxy(&imgs), Err(ReconError::MixedIntrinsics)));
    }
}
