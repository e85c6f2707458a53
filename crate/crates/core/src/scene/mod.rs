//! Procedural labeled scenes: terrain, roads, extruded buildings and placed
//! objects merged into one [`LabeledMesh`].

pub mod assemble;
pub mod catalog;
pub mod extrude;
pub mod footprint;
pub mod placement;
pub mod terrain;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assemble::{assemble_scene, object_class, GroundCover};
pub use catalog::{Asset, AssetCatalog, TemplateMesh};
pub use extrude::extrude_buildings;
pub use footprint::{
    parse_geojson, to_geojson, BuildingFootprint, BuildingStyle, GeoLayers, RoadNetwork, RoadSegment, RoofKind,
    WindowLayout,
};
pub use placement::{place_objects, PlacedObject, Placement, PlacementRule, PlacementStrategy, PlacementWarning};
pub use terrain::{generate_terrain, sculpt_ground_details, HeightField};

use crate::geom::Rect;
use crate::mesh::MeshError;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("footprint {index}: {reason}")]
    InvalidFootprint { index: usize, reason: String },
    #[error("footprint {index} extends beyond the terrain")]
    FootprintOutsideTerrain { index: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("unknown asset: {0}")]
    UnknownAsset(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Street grid with rectangular buildings in the blocks between streets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutParams {
    pub block_size: f64,
    pub road_width: f64,
    pub building_count: usize,
    pub footprint_size: [f64; 2],
    pub height_range: [f64; 2],
    /// Minimum distance between a building and a road edge (m).
    pub setback: f64,
    pub gable_fraction: f64,
    pub window_fraction: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            block_size: 70.0,
            road_width: 8.0,
            building_count: 20,
            footprint_size: [10.0, 24.0],
            height_range: [6.0, 30.0],
            setback: 6.0,
            gable_fraction: 0.3,
            window_fraction: 0.5,
        }
    }
}

/// Generates roads and footprints inside `extent`, standing in for map data.
/// Fewer buildings than requested come back when the blocks fill up.
pub fn procedural_layout(seed: u64, extent: Rect, params: &LayoutParams) -> Result<GeoLayers, SceneError> {
    if !(params.block_size > params.road_width && params.road_width > 0.0) {
        return Err(SceneError::InvalidParameter("block_size must exceed a positive road_width".into()));
    }
    let [s0, s1] = params.footprint_size;
    let [h0, h1] = params.height_range;
    if !(s0 > 0.0 && s1 >= s0 && h0 > 0.0 && h1 >= h0) {
        return Err(SceneError::InvalidParameter("footprint_size and height_range must be positive and ordered".into()));
    }
    let mut rng = rng_from_seed(derive_seed(seed, "layout"));
    let mut roads = RoadNetwork::default();
    let lines = |lo: f64, hi: f64| -> Vec<f64> {
        let n = ((hi - lo) / params.block_size).floor() as usize;
        (1..=n).map(|k| lo + k as f64 * params.block_size - 0.5 * params.block_size).collect()
    };
    let xs = lines(extent.min[0], extent.max[0]);
    let ys = lines(extent.min[1], extent.max[1]);
    for &x in &xs {
        roads.segments.push(RoadSegment { points: vec![[x, extent.min[1]], [x, extent.max[1]]], width: params.road_width });
    }
    for &y in &ys {
        roads.segments.push(RoadSegment { points: vec![[extent.min[0], y], [extent.max[0], y]], width: params.road_width });
    }
    let clearance = 0.5 * params.road_width + params.setback;
    let mut placed: Vec<Rect> = Vec::new();
    let mut footprints = Vec::new();
    let mut attempts = 0;
    while footprints.len() < params.building_count && attempts < 200 * params.building_count.max(1) {
        attempts += 1;
        let w = rng.random_range(s0..=s1);
        let d = rng.random_range(s0..=s1);
        let x = rng.random_range(extent.min[0] + 2.0..=(extent.max[0] - w - 2.0).max(extent.min[0] + 2.0));
        let y = rng.random_range(extent.min[1] + 2.0..=(extent.max[1] - d - 2.0).max(extent.min[1] + 2.0));
        let rect = Rect::new([x, y], [x + w, y + d]);
        if rect.max[0] > extent.max[0] - 2.0 || rect.max[1] > extent.max[1] - 2.0 {
            continue;
        }
        let hits_road = xs.iter().any(|&rx| rect.min[0] - clearance < rx && rx < rect.max[0] + clearance)
            || ys.iter().any(|&ry| rect.min[1] - clearance < ry && ry < rect.max[1] + clearance);
        let hits_building = placed.iter().any(|o| {
            rect.min[0] < o.max[0] + 6.0
                && o.min[0] < rect.max[0] + 6.0
                && rect.min[1] < o.max[1] + 6.0
                && o.min[1] < rect.max[1] + 6.0
        });
        if hits_road || hits_building {
            continue;
        }
        let style = BuildingStyle {
            roof: if rng.random_bool(params.gable_fraction.clamp(0.0, 1.0)) { RoofKind::Gable } else { RoofKind::Flat },
            windows: rng.random_bool(params.window_fraction.clamp(0.0, 1.0)).then(WindowLayout::default),
        };
        let height = rng.random_range(h0..=h1);
        placed.push(rect);
        footprints.push(BuildingFootprint::rectangle(rect.min, rect.max, height, style));
    }
    Ok(GeoLayers { footprints, roads })
}
