//! A small procedural town shared by the scene and pipeline tests.

#![allow(dead_code)]

use std::f64::consts::TAU;

use aerosynth::class::SemanticClass;
use aerosynth::geom::Rect;
use aerosynth::mesh::LabeledMesh;
use aerosynth::rng::derive_seed;
use aerosynth::scene::{
    assemble_scene, extrude_buildings, generate_terrain, place_objects, procedural_layout, AssetCatalog, GeoLayers,
    GroundCover, HeightField, LayoutParams, Placement, PlacementRule, PlacementStrategy,
};

pub struct Town {
    pub hf: HeightField,
    pub layers: GeoLayers,
    pub rules: Vec<PlacementRule>,
    pub placement: Placement,
    pub catalog: AssetCatalog,
    pub cover: GroundCover,
    pub mesh: LabeledMesh,
}

fn rule(class: SemanticClass, strategy: PlacementStrategy, interval: f64, buffer: f64, sep: f64, coverage: f64) -> PlacementRule {
    PlacementRule {
        buffer,
        min_separation: sep,
        coverage_fraction: coverage,
        yaw_range: [0.0, TAU],
        scale_range: if class.is_vegetation() { [0.8, 1.2] } else { [1.0, 1.0] },
        ..PlacementRule::new(class, strategy, interval)
    }
}

/// One rule per strategy plus a few extra classes.
pub fn rules() -> Vec<PlacementRule> {
    use PlacementStrategy::*;
    use SemanticClass::*;
    vec![
        rule(Vehicle, OnRoad, 20.0, 0.0, 3.0, 0.0),
        rule(LightPole, RoadsideBuffer, 20.0, 1.5, 5.0, 0.0),
        rule(Bike, RoadsideBuffer, 35.0, 3.0, 2.0, 0.0),
        rule(Fence, BuildingBuffer, 7.0, 3.5, 0.0, 0.0),
        rule(MediumVegetation, BuildingBuffer, 12.0, 4.0, 3.0, 0.0),
        rule(HighVegetation, ForestCluster, 6.0, 0.0, 0.0, 0.2),
        rule(Clutter, ScatterPolygon, 10.0, 0.0, 3.0, 0.05),
        rule(MilitaryVehicle, ScatterPolygon, 12.0, 0.0, 4.0, 0.05),
    ]
}

pub fn town(seed: u64, size: f64) -> Town {
    let hf = generate_terrain(derive_seed(seed, "terrain"), [size, size], 2.0, 2.0).unwrap();
    let layout = LayoutParams { building_count: 8, ..LayoutParams::default() };
    let layers = procedural_layout(seed, Rect::from_size(size, size), &layout).unwrap();
    let buildings = extrude_buildings(&layers.footprints, &hf).unwrap();
    let catalog = AssetCatalog::builtin();
    let rules = rules();
    let first = layers.footprints.len() as u32 + 1;
    let placement = place_objects(&rules, &layers.roads, &layers.footprints, &hf, &catalog, derive_seed(seed, "placement"), first).unwrap();
    let cover = GroundCover::default();
    let mesh = assemble_scene(&hf, &buildings, &placement.objects, &catalog, &layers.roads, &layers.footprints, &cover).unwrap();
    Town { hf, layers, rules, placement, catalog, cover, mesh }
}
