//! Asset catalog: small template meshes assembled from procedural primitives.
//!
//! Templates are modelled in a local frame with the object's ground contact
//! at the origin and +x as its forward axis.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::class::SemanticClass;
use crate::geom::{triangle_area, Aabb, Vec3};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TemplateMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TemplateMesh {
    fn push_tri(&mut self, a: Vec3, b: Vec3, c: Vec3) {
        if triangle_area(&a, &b, &c) <= 1e-12 {
            return;
        }
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&[a, b, c]);
        self.triangles.push([base, base + 1, base + 2]);
    }

    fn push_quad(&mut self, a: Vec3, b: Vec3, c: Vec3, d: Vec3) {
        self.push_tri(a, b, c);
        self.push_tri(a, c, d);
    }

    pub fn merge(mut self, other: TemplateMesh) -> Self {
        let off = self.vertices.len() as u32;
        self.vertices.extend(other.vertices);
        self.triangles
            .extend(other.triangles.into_iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        self
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Closed axis-aligned box, outward facing.
    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let mut m = TemplateMesh::default();
        let p = |x: bool, y: bool, z: bool| {
            Vec3::new(
                if x { max.x } else { min.x },
                if y { max.y } else { min.y },
                if z { max.z } else { min.z },
            )
        };
        let (f, t) = (false, true);
        m.push_quad(p(f, f, f), p(f, t, f), p(t, t, f), p(t, f, f)); // bottom
        m.push_quad(p(f, f, t), p(t, f, t), p(t, t, t), p(f, t, t)); // top
        m.push_quad(p(f, f, f), p(t, f, f), p(t, f, t), p(f, f, t)); // -y
        m.push_quad(p(t, t, f), p(f, t, f), p(f, t, t), p(t, t, t)); // +y
        m.push_quad(p(f, t, f), p(f, f, f), p(f, f, t), p(f, t, t)); // -x
        m.push_quad(p(t, f, f), p(t, t, f), p(t, t, t), p(t, f, t)); // +x
        m
    }

    /// Vertical capped cylinder standing on `base`.
    pub fn cylinder(base: Vec3, radius: f64, height: f64, segments: usize) -> Self {
        let mut m = TemplateMesh::default();
        let ring = |z: f64| -> Vec<Vec3> {
            (0..segments)
                .map(|k| {
                    let a = TAU * k as f64 / segments as f64;
                    base + Vec3::new(radius * a.cos(), radius * a.sin(), z)
                })
                .collect()
        };
        let lo = ring(0.0);
        let hi = ring(height);
        for k in 0..segments {
            let j = (k + 1) % segments;
            m.push_quad(lo[k], lo[j], hi[j], hi[k]);
        }
        for k in 1..segments - 1 {
            m.push_tri(hi[0], hi[k], hi[k + 1]);
            m.push_tri(lo[0], lo[k + 1], lo[k]);
        }
        m
    }

    /// Closed cone with its base disc at `base`.
    pub fn cone(base: Vec3, radius: f64, height: f64, segments: usize) -> Self {
        let mut m = TemplateMesh::default();
        let apex = base + Vec3::new(0.0, 0.0, height);
        let ring: Vec<Vec3> = (0..segments)
            .map(|k| {
                let a = TAU * k as f64 / segments as f64;
                base + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
            })
            .collect();
        for k in 0..segments {
            let j = (k + 1) % segments;
            m.push_tri(ring[k], ring[j], apex);
        }
        for k in 1..segments - 1 {
            m.push_tri(ring[0], ring[k + 1], ring[k]);
        }
        m
    }

    /// Latitude/longitude ellipsoid, outward facing.
    pub fn ellipsoid(center: Vec3, radii: Vec3, stacks: usize, slices: usize) -> Self {
        let mut m = TemplateMesh::default();
        let point = |i: usize, k: usize| {
            let theta = std::f64::consts::PI * i as f64 / stacks as f64;
            let phi = TAU * k as f64 / slices as f64;
            center
                + Vec3::new(
                    radii.x * theta.sin() * phi.cos(),
                    radii.y * theta.sin() * phi.sin(),
                    radii.z * theta.cos(),
                )
        };
        for i in 0..stacks {
            for k in 0..slices {
                let j = (k + 1) % slices;
                let (a, b, c, d) = (point(i, k), point(i + 1, k), point(i + 1, j), point(i, j));
                if i == 0 {
                    m.push_tri(a, b, c);
                } else if i == stacks - 1 {
                    m.push_tri(a, b, d);
                } else {
                    m.push_quad(a, b, c, d);
                }
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Asset {
    pub id: String,
    pub class: SemanticClass,
    pub mesh: TemplateMesh,
    /// Radius of the circle enclosing the template's XY projection.
    pub footprint_radius: f64,
    /// Height above the terrain at which the template origin is mounted.
    pub mount_offset: f64,
}

impl Asset {
    pub fn new(id: &str, class: SemanticClass, mesh: TemplateMesh) -> Self {
        let footprint_radius = mesh
            .vertices
            .iter()
            .map(|v| (v.x * v.x + v.y * v.y).sqrt())
            .fold(0.0, f64::max);
        Asset {
            id: id.to_string(),
            class,
            mesh,
            footprint_radius,
            mount_offset: 0.0,
        }
    }

    pub fn height(&self) -> f64 {
        let b = self.mesh.bounds();
        b.max.z - b.min.z.min(0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssetCatalog {
    pub assets: BTreeMap<String, Asset>,
}

const SEGMENTS: usize = 12;

impl AssetCatalog {
    pub fn insert(&mut self, asset: Asset) {
        self.assets.insert(asset.id.clone(), asset);
    }

    pub fn get(&self, id: &str) -> Option<&Asset> {
        self.assets.get(id)
    }

    /// Asset ids whose nominal class is `class`, in id order.
    pub fn models_for(&self, class: SemanticClass) -> Vec<&str> {
        self.assets
            .values()
            .filter(|a| a.class == class)
            .map(|a| a.id.as_str())
            .collect()
    }

    /// The bundled catalog of procedural assets.
    pub fn builtin() -> Self {
        use SemanticClass::*;
        let v = Vec3::new;
        let cuboid = |a: [f64; 3], b: [f64; 3]| TemplateMesh::cuboid(v(a[0], a[1], a[2]), v(b[0], b[1], b[2]));
        let mut cat = AssetCatalog::default();

        cat.insert(Asset::new(
            "shrub",
            LowVegetation,
            TemplateMesh::ellipsoid(v(0., 0., 0.6), v(0.8, 0.8, 0.6), 8, SEGMENTS),
        ));
        cat.insert(Asset::new(
            "tree_small",
            MediumVegetation,
            TemplateMesh::cylinder(v(0., 0., 0.), 0.15, 1.6, 8)
                .merge(TemplateMesh::ellipsoid(v(0., 0., 2.6), v(1.4, 1.4, 1.2), 10, SEGMENTS)),
        ));
        cat.insert(Asset::new(
            "tree_large",
            HighVegetation,
            TemplateMesh::cylinder(v(0., 0., 0.), 0.3, 4.2, 8)
                .merge(TemplateMesh::ellipsoid(v(0., 0., 7.0), v(3.0, 3.0, 3.0), 12, 16)),
        ));
        cat.insert(Asset::new(
            "conifer",
            HighVegetation,
            TemplateMesh::cylinder(v(0., 0., 0.), 0.25, 1.8, 8)
                .merge(TemplateMesh::cone(v(0., 0., 1.5), 2.0, 8.0, SEGMENTS)),
        ));
        cat.insert(Asset::new("tree_crown", HighVegetation, sphere_crown(5.0)));

        cat.insert(Asset::new(
            "car",
            Vehicle,
            cuboid([-2.25, -0.9, 0.2], [2.25, 0.9, 0.95])
                .merge(cuboid([-1.2, -0.8, 0.95], [1.0, 0.8, 1.5])),
        ));
        cat.insert(Asset::new(
            "truck",
            Truck,
            cuboid([2.0, -1.2, 0.3], [4.0, 1.2, 3.0])
                .merge(cuboid([-4.0, -1.25, 0.5], [1.9, 1.25, 3.4])),
        ));
        cat.insert(Asset::new(
            "aircraft",
            Aircraft,
            cuboid([-6.0, -0.8, 0.8], [6.0, 0.8, 2.6])
                .merge(cuboid([-1.0, -6.0, 1.4], [1.0, 6.0, 1.6]))
                .merge(cuboid([-6.0, -0.1, 2.6], [-4.6, 0.1, 4.0]))
                .merge(cuboid([-0.2, -0.2, 0.0], [0.2, 0.2, 0.8])),
        ));
        cat.insert(Asset::new(
            "military_vehicle",
            MilitaryVehicle,
            cuboid([-3.25, -1.7, 0.3], [3.25, 1.7, 1.6])
                .merge(cuboid([-1.5, -1.2, 1.6], [1.5, 1.2, 2.4]))
                .merge(cuboid([1.5, -0.1, 1.9], [5.0, 0.1, 2.1])),
        ));
        cat.insert(Asset::new(
            "bicycle",
            Bike,
            cuboid([-0.9, -0.03, 0.0], [-0.25, 0.03, 0.68])
                .merge(cuboid([0.25, -0.03, 0.0], [0.9, 0.03, 0.68]))
                .merge(cuboid([-0.6, -0.04, 0.7], [0.6, 0.04, 0.78]))
                .merge(cuboid([0.5, -0.3, 0.95], [0.56, 0.3, 1.0])),
        ));
        cat.insert(Asset::new(
            "motorcycle",
            Motorcycle,
            cuboid([-1.05, -0.1, 0.0], [1.05, 0.1, 0.65])
                .merge(cuboid([-0.7, -0.3, 0.35], [0.6, 0.3, 0.9]))
                .merge(cuboid([0.6, -0.4, 1.0], [0.7, 0.4, 1.1])),
        ));
        cat.insert(Asset::new(
            "light_pole",
            LightPole,
            TemplateMesh::cylinder(v(0., 0., 0.), 0.12, 8.0, 8)
                .merge(cuboid([0.0, -0.06, 7.8], [2.0, 0.06, 7.95]))
                .merge(cuboid([1.6, -0.2, 7.6], [2.2, 0.2, 7.8])),
        ));
        cat.insert(Asset::new(
            "street_sign",
            StreetSign,
            TemplateMesh::cylinder(v(0., 0., 0.), 0.05, 2.2, 8)
                .merge(cuboid([-0.03, -0.4, 1.6], [0.03, 0.4, 2.4])),
        ));
        cat.insert(Asset::new(
            "bench",
            Clutter,
            cuboid([-0.9, -0.3, 0.4], [0.9, 0.3, 0.5])
                .merge(cuboid([-0.9, 0.25, 0.5], [0.9, 0.3, 0.95]))
                .merge(cuboid([-0.8, -0.25, 0.0], [-0.7, 0.25, 0.4]))
                .merge(cuboid([0.7, -0.25, 0.0], [0.8, 0.25, 0.4])),
        ));
        cat.insert(Asset::new(
            "container",
            Clutter,
            cuboid([-3.0, -1.2, 0.0], [3.0, 1.2, 2.6]),
        ));
        cat.insert(Asset::new(
            "barrier",
            Clutter,
            cuboid([-1.0, -0.25, 0.0], [1.0, 0.25, 1.0]),
        ));
        cat.insert(Asset::new(
            "fence_panel",
            Fence,
            cuboid([-3.0, -0.05, 0.0], [3.0, 0.05, 1.6]),
        ));
        cat
    }
}

/// Closed spherical crown of radius `r` resting on the ground.
pub fn sphere_crown(r: f64) -> TemplateMesh {
    TemplateMesh::ellipsoid(Vec3::new(0., 0., r), Vec3::repeat(r), 24, 32)
}

/// Smallest width of a set of XY points over 32 projection directions.
pub fn min_horizontal_width<'a>(points: impl Iterator<Item = &'a Vec3> + Clone) -> f64 {
    (0..32)
        .map(|k| {
            let a = std::f64::consts::PI * k as f64 / 32.0;
            let (c, s) = (a.cos(), a.sin());
            let (lo, hi) = points
                .clone()
                .map(|p| p.x * c + p.y * s)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
            hi - lo
        })
        .fold(f64::INFINITY, f64::min)
}
