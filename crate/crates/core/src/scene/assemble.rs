//! Whole-scene assembly: terrain with ground cover, buildings and objects in
//! one labeled mesh.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use super::catalog::{Asset, AssetCatalog};
use super::footprint::{BuildingFootprint, RoadNetwork};
use super::placement::PlacedObject;
use super::terrain::HeightField;
use super::SceneError;
use crate::class::SemanticClass;
use crate::geom::{point_polygon_distance, triangle_area, Vec2, Vec3};
use crate::mesh::LabeledMesh;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundCover {
    /// Terrain within this distance of a building footprint is dirt (m).
    pub dirt_buffer: f64,
}

impl Default for GroundCover {
    fn default() -> Self {
        GroundCover { dirt_buffer: 3.0 }
    }
}

/// Class an object receives once placed. Vegetation is reclassified from its
/// scaled bounding-box height; everything else keeps the asset class.
pub fn object_class(asset: &Asset, scale: f64) -> SemanticClass {
    if asset.class.is_vegetation() {
        SemanticClass::vegetation_for_height(asset.height() * scale)
    } else {
        asset.class
    }
}

/// Ground-cover label of a point: road on a road surface, dirt near a
/// building, grass elsewhere.
pub fn ground_label(p: Vec2, roads: &RoadNetwork, rings: &[Vec<Vec2>], cover: &GroundCover) -> SemanticClass {
    if roads.on_road(p) {
        SemanticClass::Road
    } else if rings.iter().any(|r| point_polygon_distance(p, r) <= cover.dirt_buffer) {
        SemanticClass::Dirt
    } else {
        SemanticClass::Grass
    }
}

/// Terrain as two triangles per cell, labeled by the centroid's cover.
pub fn terrain_mesh(hf: &HeightField, roads: &RoadNetwork, rings: &[Vec<Vec2>], cover: &GroundCover) -> LabeledMesh {
    let mut mesh = LabeledMesh::new();
    for r in 0..hf.rows {
        for c in 0..hf.cols {
            let p = hf.node_xy(r, c);
            mesh.add_vertex(Vec3::new(p.x, p.y, hf.get(r, c)));
        }
    }
    let idx = |r: usize, c: usize| (r * hf.cols + c) as u32;
    for r in 0..hf.rows - 1 {
        for c in 0..hf.cols - 1 {
            let quad = [idx(r, c), idx(r, c + 1), idx(r + 1, c + 1), idx(r + 1, c)];
            for tri in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                let [a, b, d] = tri.map(|i| mesh.vertices[i as usize]);
                let centroid = (a + b + d) / 3.0;
                let label = ground_label(centroid.xy(), roads, rings, cover);
                mesh.add_triangle(tri, label, 0);
            }
        }
    }
    mesh
}

/// Appends the posed template of `obj` to `mesh`.
fn add_object(mesh: &mut LabeledMesh, asset: &Asset, obj: &PlacedObject) {
    let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), obj.yaw);
    let origin = Vec3::from(obj.position);
    let class = object_class(asset, obj.scale);
    let placed: Vec<Vec3> = asset.mesh.vertices.iter().map(|v| rot * (v * obj.scale) + origin).collect();
    let base = mesh.vertices.len() as u32;
    mesh.vertices.extend_from_slice(&placed);
    for t in &asset.mesh.triangles {
        let [a, b, c] = t.map(|i| &placed[i as usize]);
        if triangle_area(a, b, c) > 1e-12 {
            mesh.add_triangle(t.map(|i| base + i), class, obj.instance_id);
        }
    }
}

/// Merges terrain, the extruded buildings and every placed object.
pub fn assemble_scene(
    hf: &HeightField,
    buildings: &LabeledMesh,
    objects: &[PlacedObject],
    catalog: &AssetCatalog,
    roads: &RoadNetwork,
    footprints: &[BuildingFootprint],
    cover: &GroundCover,
) -> Result<LabeledMesh, SceneError> {
    let assets = objects
        .iter()
        .map(|o| catalog.get(&o.model_id).ok_or_else(|| SceneError::UnknownAsset(o.model_id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    if !(cover.dirt_buffer >= 0.0) {
        return Err(SceneError::InvalidParameter(format!("dirt_buffer {} must be non-negative", cover.dirt_buffer)));
    }
    let rings = footprints
        .iter()
        .enumerate()
        .map(|(i, f)| f.validated_ring(i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut mesh = terrain_mesh(hf, roads, &rings, cover);
    mesh.append(buildings);
    for (obj, asset) in objects.iter().zip(assets) {
        add_object(&mut mesh, asset, obj);
    }
    mesh.validate()?;
    Ok(mesh)
}
