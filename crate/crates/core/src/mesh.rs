//! Labeled triangle soup: the ground-truth world every later stage samples.

use thiserror::Error;

use crate::class::SemanticClass;
use crate::geom::{triangle_area, triangle_normal, Aabb, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {vertex} but mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        vertex: u32,
        count: usize,
    },
    #[error("triangle {0} has zero area")]
    Degenerate(usize),
    #[error("triangle {0} has instance-capable class {1} but no instance id")]
    MissingInstance(usize, SemanticClass),
    #[error("per-triangle label arrays have {labels} entries for {triangles} triangles")]
    LabelLength { labels: usize, triangles: usize },
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub tri_semantic: Vec<SemanticClass>,
    /// Instance id per triangle, 0 when the triangle belongs to no object.
    pub tri_instance: Vec<u32>,
}

impl LabeledMesh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn add_vertex(&mut self, v: Vec3) -> u32 {
        self.vertices.push(v);
        (self.vertices.len() - 1) as u32
    }

    pub fn add_triangle(&mut self, tri: [u32; 3], semantic: SemanticClass, instance: u32) {
        self.triangles.push(tri);
        self.tri_semantic.push(semantic);
        self.tri_instance.push(instance);
    }

    /// Adds a triangle by coordinates, skipping it when it has no area.
    pub fn push_triangle(&mut self, a: Vec3, b: Vec3, c: Vec3, semantic: SemanticClass, instance: u32) -> bool {
        if triangle_area(&a, &b, &c) <= 1e-12 {
            return false;
        }
        let i = self.add_vertex(a);
        let j = self.add_vertex(b);
        let k = self.add_vertex(c);
        self.add_triangle([i, j, k], semantic, instance);
        true
    }

    /// Adds a planar quad `a b c d` (counter-clockwise seen from the front) as
    /// two triangles.
    pub fn push_quad(&mut self, a: Vec3, b: Vec3, c: Vec3, d: Vec3, semantic: SemanticClass, instance: u32) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&[a, b, c, d]);
        self.add_triangle([base, base + 1, base + 2], semantic, instance);
        self.add_triangle([base, base + 2, base + 3], semantic, instance);
    }

    /// Appends another mesh, remapping its vertex indices.
    pub fn append(&mut self, other: &LabeledMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
        self.tri_semantic.extend_from_slice(&other.tri_semantic);
        self.tri_instance.extend_from_slice(&other.tri_instance);
    }

    #[inline]
    pub fn triangle_vertices(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        triangle_area(&a, &b, &c)
    }

    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(t);
        triangle_normal(&a, &b, &c)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Checks every structural invariant of a labeled mesh.
    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.triangles.len();
        if self.tri_semantic.len() != n || self.tri_instance.len() != n {
            return Err(MeshError::LabelLength {
                labels: self.tri_semantic.len().min(self.tri_instance.len()),
                triangles: n,
            });
        }
        if let Some(i) = self.vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFinite(i));
        }
        let count = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v as usize >= count {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        vertex: v,
                        count,
                    });
                }
            }
            if self.triangle_area(t) <= 0.0 {
                return Err(MeshError::Degenerate(t));
            }
            let sem = self.tri_semantic[t];
            if sem.is_instance_capable() && self.tri_instance[t] == 0 {
                return Err(MeshError::MissingInstance(t, sem));
            }
        }
        Ok(())
    }
}
