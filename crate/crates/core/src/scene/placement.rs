//! Rule-driven object placement.
//!
//! Each rule places objects of one class with one of five strategies:
//! on the road surface, in a buffer beside roads, in a buffer around
//! buildings, scattered inside random polygons and rings, or as forest
//! clusters filling random polygons. Every candidate passes the same
//! occupancy test before it is accepted:
//!
//! * its footprint circle stays inside the terrain and off every building
//!   footprint (and off the road surface, except for on-road rules);
//! * its distance to every accepted object is at least the larger of the two
//!   `min_separation` values;
//! * footprint circles do not overlap, except that two vegetation objects
//!   only need each centre outside the other's crown circle.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::assemble::object_class;
use super::catalog::AssetCatalog;
use super::footprint::{BuildingFootprint, RoadNetwork};
use super::terrain::HeightField;
use super::SceneError;
use crate::class::SemanticClass;
use crate::geom::{point_in_polygon, point_polygon_distance, signed_area, Rect, Vec2};
use crate::rng::{chunk_seed, rng_from_seed, StageRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementStrategy {
    OnRoad,
    RoadsideBuffer,
    BuildingBuffer,
    ScatterPolygon,
    ForestCluster,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementRule {
    pub target_class: SemanticClass,
    /// Catalog models to draw from; empty means every model of the class.
    #[serde(default)]
    pub models: Vec<String>,
    pub strategy: PlacementStrategy,
    /// Nominal spacing between consecutive candidates (m).
    pub interval: f64,
    /// Buffer width beside roads or around buildings (m).
    #[serde(default)]
    pub buffer: f64,
    #[serde(default)]
    pub min_separation: f64,
    /// Share of the free ground covered by scatter / forest shapes.
    #[serde(default)]
    pub coverage_fraction: f64,
    pub scale_range: [f64; 2],
    pub yaw_range: [f64; 2],
}

impl PlacementRule {
    pub fn new(target_class: SemanticClass, strategy: PlacementStrategy, interval: f64) -> Self {
        PlacementRule {
            target_class,
            models: Vec::new(),
            strategy,
            interval,
            buffer: 0.0,
            min_separation: 0.0,
            coverage_fraction: 0.0,
            scale_range: [1.0, 1.0],
            yaw_range: [0.0, 0.0],
        }
    }

    pub fn validate(&self, index: usize) -> Result<(), SceneError> {
        let bad = |m: String| SceneError::InvalidParameter(format!("placement rule {index}: {m}"));
        if !(self.interval > 0.0) {
            return Err(bad(format!("interval {} must be positive", self.interval)));
        }
        if !(self.min_separation >= 0.0) {
            return Err(bad(format!("min_separation {} must be non-negative", self.min_separation)));
        }
        if !(0.0..=1.0).contains(&self.coverage_fraction) {
            return Err(bad(format!("coverage_fraction {} outside [0, 1]", self.coverage_fraction)));
        }
        if !(self.buffer >= 0.0) {
            return Err(bad(format!("buffer {} must be non-negative", self.buffer)));
        }
        let [s0, s1] = self.scale_range;
        if !(s0 > 0.0 && s1 >= s0) {
            return Err(bad(format!("scale_range {s0}..{s1} must be positive and ordered")));
        }
        if !(self.yaw_range[1] >= self.yaw_range[0]) {
            return Err(bad("yaw_range must be ordered".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub model_id: String,
    pub semantic: SemanticClass,
    pub instance_id: u32,
    pub position: [f64; 3],
    pub yaw: f64,
    pub scale: f64,
    /// Index of the rule that placed the object.
    pub rule: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementWarning {
    pub rule: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Placement {
    pub objects: Vec<PlacedObject>,
    pub warnings: Vec<PlacementWarning>,
    pub placed_per_rule: Vec<usize>,
}

struct Occupant {
    pos: Vec2,
    radius: f64,
    separation: f64,
    vegetation: bool,
}

const GRID_CELL: f64 = 8.0;

struct Occupancy<'a> {
    extent: Rect,
    rings: Vec<Vec<Vec2>>,
    roads: &'a RoadNetwork,
    placed: Vec<Occupant>,
    grid: HashMap<(i64, i64), Vec<usize>>,
    max_radius: f64,
    max_separation: f64,
}

impl<'a> Occupancy<'a> {
    fn cell(p: Vec2) -> (i64, i64) {
        ((p.x / GRID_CELL).floor() as i64, (p.y / GRID_CELL).floor() as i64)
    }

    fn admits(&self, cand: &Occupant, on_road: bool) -> bool {
        if !self.extent.contains_disc(cand.pos, cand.radius) {
            return false;
        }
        if self.rings.iter().any(|r| point_polygon_distance(cand.pos, r) < cand.radius) {
            return false;
        }
        if on_road {
            if !self.roads.on_road(cand.pos) {
                return false;
            }
        } else if self.roads.distance_to_surface(cand.pos) < cand.radius.min(0.5) || self.roads.on_road(cand.pos) {
            return false;
        }
        let reach = cand.separation.max(self.max_separation) + cand.radius + self.max_radius;
        let span = (reach / GRID_CELL).ceil() as i64;
        let (cx, cy) = Self::cell(cand.pos);
        for gx in cx - span..=cx + span {
            for gy in cy - span..=cy + span {
                let Some(ids) = self.grid.get(&(gx, gy)) else { continue };
                for &i in ids {
                    let o = &self.placed[i];
                    let d = (o.pos - cand.pos).norm();
                    if d < cand.separation.max(o.separation) {
                        return false;
                    }
                    let clearance = if cand.vegetation && o.vegetation {
                        cand.radius.max(o.radius)
                    } else {
                        cand.radius + o.radius
                    };
                    if d < clearance {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, o: Occupant) {
        self.max_radius = self.max_radius.max(o.radius);
        self.max_separation = self.max_separation.max(o.separation);
        let key = Self::cell(o.pos);
        self.grid.entry(key).or_default().push(self.placed.len());
        self.placed.push(o);
    }
}

struct Candidate {
    pos: Vec2,
    yaw: f64,
    model: String,
    scale: f64,
}

/// Places objects for every rule, in rule order. Instance ids start at
/// `first_instance` and increase by one per accepted object.
#[allow(clippy::too_many_arguments)]
pub fn place_objects(
    rules: &[PlacementRule],
    roads: &RoadNetwork,
    footprints: &[BuildingFootprint],
    hf: &HeightField,
    catalog: &AssetCatalog,
    seed: u64,
    first_instance: u32,
) -> Result<Placement, SceneError> {
    roads.validate()?;
    let rings = footprints
        .iter()
        .enumerate()
        .map(|(i, f)| f.validated_ring(i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rule_models = Vec::with_capacity(rules.len());
    for (i, rule) in rules.iter().enumerate() {
        rule.validate(i)?;
        let models: Vec<String> = if rule.models.is_empty() {
            catalog.models_for(rule.target_class).into_iter().map(str::to_owned).collect()
        } else {
            rule.models.clone()
        };
        if models.is_empty() {
            return Err(SceneError::UnknownAsset(format!(
                "rule {i}: no catalog model for class {}",
                rule.target_class
            )));
        }
        if let Some(m) = models.iter().find(|m| catalog.get(m).is_none()) {
            return Err(SceneError::UnknownAsset(format!("rule {i}: model `{m}`")));
        }
        rule_models.push(models);
    }

    let extent = hf.extent();
    let free_area = {
        let building: f64 = rings.iter().map(|r| signed_area(r).abs()).sum();
        let road: f64 = roads.segments.iter().map(|s| s.length() * s.width).sum();
        (extent.width() * extent.height() - building - road).max(0.0)
    };
    let mut occ = Occupancy {
        extent,
        rings,
        roads,
        placed: Vec::new(),
        grid: HashMap::new(),
        max_radius: 0.0,
        max_separation: 0.0,
    };
    let mut out = Placement::default();
    let mut next_instance = first_instance;

    for (ri, rule) in rules.iter().enumerate() {
        let mut rng = rng_from_seed(chunk_seed(seed, ri as u64));
        let models = &rule_models[ri];
        let candidates = match rule.strategy {
            PlacementStrategy::OnRoad => on_road_candidates(rule, models, roads, &mut rng),
            PlacementStrategy::RoadsideBuffer => roadside_candidates(rule, models, roads, &mut rng),
            PlacementStrategy::BuildingBuffer => building_candidates(rule, models, &occ.rings, catalog, &mut rng),
            PlacementStrategy::ScatterPolygon => {
                shape_candidates(rule, models, extent, free_area, ShapeKind::Scatter, &mut rng)
            }
            PlacementStrategy::ForestCluster => {
                shape_candidates(rule, models, extent, free_area, ShapeKind::Forest, &mut rng)
            }
        };
        let n_candidates = candidates.len();
        let mut placed = 0usize;
        for c in candidates {
            let asset = catalog.get(&c.model).expect("models checked above");
            let cand = Occupant {
                pos: c.pos,
                radius: asset.footprint_radius * c.scale,
                separation: rule.min_separation,
                vegetation: asset.class.is_vegetation(),
            };
            if !occ.admits(&cand, rule.strategy == PlacementStrategy::OnRoad) {
                continue;
            }
            let z = hf.height_at(c.pos.x, c.pos.y) + asset.mount_offset;
            out.objects.push(PlacedObject {
                model_id: c.model,
                semantic: object_class(asset, c.scale),
                instance_id: next_instance,
                position: [c.pos.x, c.pos.y, z],
                yaw: c.yaw,
                scale: c.scale,
                rule: ri,
            });
            next_instance += 1;
            placed += 1;
            occ.insert(cand);
        }
        if placed == 0 && (n_candidates > 0 || rule.coverage_fraction > 0.0 || !matches!(rule.strategy, PlacementStrategy::ScatterPolygon | PlacementStrategy::ForestCluster)) {
            let message = format!(
                "{:?} rule for {} placed nothing ({} candidates, no free space)",
                rule.strategy, rule.target_class, n_candidates
            );
            log::warn!("placement rule {ri}: {message}");
            out.warnings.push(PlacementWarning { rule: ri, message });
        }
        out.placed_per_rule.push(placed);
    }
    Ok(out)
}

fn draw_scale(rule: &PlacementRule, rng: &mut StageRng) -> f64 {
    let [a, b] = rule.scale_range;
    if b > a {
        rng.random_range(a..=b)
    } else {
        a
    }
}

fn draw_yaw(rule: &PlacementRule, rng: &mut StageRng) -> f64 {
    let [a, b] = rule.yaw_range;
    if b > a {
        rng.random_range(a..=b)
    } else {
        a
    }
}

fn pick_model(models: &[String], rng: &mut StageRng) -> String {
    models.choose(rng).expect("non-empty model list").clone()
}

/// Point and unit tangent at arclength `s` along a polyline.
fn walk(line: &[Vec2], mut s: f64) -> Option<(Vec2, Vec2)> {
    for w in line.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        if len == 0.0 {
            continue;
        }
        if s <= len {
            let t = seg / len;
            return Some((w[0] + t * s, t));
        }
        s -= len;
    }
    None
}

fn left_normal(t: Vec2) -> Vec2 {
    Vec2::new(-t.y, t.x)
}

fn on_road_candidates(rule: &PlacementRule, models: &[String], roads: &RoadNetwork, rng: &mut StageRng) -> Vec<Candidate> {
    let mut out = Vec::new();
    for seg in &roads.segments {
        let line = seg.polyline();
        let length = seg.length();
        let mut s = rng.random_range(0.0..rule.interval);
        while s <= length {
            if let Some((p, t)) = walk(&line, s) {
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let offset = side * 0.25 * seg.width;
                let heading = t.y.atan2(t.x) + if side < 0.0 { 0.0 } else { PI };
                out.push(Candidate {
                    pos: p + left_normal(t) * offset,
                    yaw: heading + draw_yaw(rule, rng),
                    model: pick_model(models, rng),
                    scale: draw_scale(rule, rng),
                });
            }
            s += rule.interval * rng.random_range(0.6..=1.4);
        }
    }
    out
}

fn roadside_candidates(rule: &PlacementRule, models: &[String], roads: &RoadNetwork, rng: &mut StageRng) -> Vec<Candidate> {
    let mut out = Vec::new();
    for seg in &roads.segments {
        let line = seg.polyline();
        let length = seg.length();
        let phase = rng.random_range(0.0..rule.interval);
        let mut k = 0usize;
        loop {
            let s = phase + k as f64 * rule.interval;
            if s > length {
                break;
            }
            k += 1;
            let Some((p, t)) = walk(&line, s) else { break };
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            // Set back from the edge by up to `buffer`, never onto the road.
            let setback = if rule.buffer > 0.0 {
                rng.random_range(0.5 * rule.buffer..=rule.buffer)
            } else {
                0.0
            };
            let n = left_normal(t) * side;
            let pos = p + n * (0.5 * seg.width + setback);
            // Face the road.
            let toward = -n;
            out.push(Candidate {
                pos,
                yaw: toward.y.atan2(toward.x) + draw_yaw(rule, rng),
                model: pick_model(models, rng),
                scale: draw_scale(rule, rng),
            });
        }
    }
    out
}

fn building_candidates(
    rule: &PlacementRule,
    models: &[String],
    rings: &[Vec<Vec2>],
    catalog: &AssetCatalog,
    rng: &mut StageRng,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for ring in rings {
        let n = ring.len();
        let perimeter: f64 = (0..n).map(|i| (ring[(i + 1) % n] - ring[i]).norm()).sum();
        let mut closed = ring.clone();
        closed.push(ring[0]);
        let mut s = rng.random_range(0.0..rule.interval);
        while s < perimeter {
            if let Some((p, t)) = walk(&closed, s) {
                let outward = -left_normal(t);
                let model = pick_model(models, rng);
                let scale = draw_scale(rule, rng);
                let r = catalog.get(&model).map_or(0.0, |a| a.footprint_radius * scale);
                let setback = if rule.buffer > r {
                    rng.random_range(r..=rule.buffer)
                } else {
                    rule.buffer
                };
                let cluster = rng.random_range(1..=3usize);
                let base_yaw = t.y.atan2(t.x) + draw_yaw(rule, rng);
                for j in 0..cluster {
                    let along = j as f64 * (2.0 * r + 0.3);
                    out.push(Candidate {
                        pos: p + outward * setback + t * along,
                        yaw: base_yaw,
                        model: model.clone(),
                        scale,
                    });
                }
            }
            s += rule.interval * rng.random_range(0.8..=1.2);
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum ShapeKind {
    Scatter,
    Forest,
}

enum Shape {
    Polygon(Vec<Vec2>),
    Ring { center: Vec2, inner: f64, outer: f64 },
}

impl Shape {
    fn area(&self) -> f64 {
        match self {
            Shape::Polygon(p) => signed_area(p).abs(),
            Shape::Ring { inner, outer, .. } => PI * (outer * outer - inner * inner),
        }
    }

    fn contains(&self, p: Vec2) -> bool {
        match self {
            Shape::Polygon(ring) => point_in_polygon(p, ring),
            Shape::Ring { center, inner, outer } => {
                let d = (p - center).norm();
                d >= *inner && d <= *outer
            }
        }
    }

    fn bbox(&self) -> (Vec2, Vec2) {
        match self {
            Shape::Polygon(ring) => ring.iter().fold(
                (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)),
                |(lo, hi), p| (lo.inf(p), hi.sup(p)),
            ),
            Shape::Ring { center, outer, .. } => (center - Vec2::repeat(*outer), center + Vec2::repeat(*outer)),
        }
    }
}

/// Random star-shaped polygon around `center`.
fn star_polygon(center: Vec2, radius: f64, rng: &mut StageRng) -> Vec<Vec2> {
    let k = rng.random_range(6..=10usize);
    let phase = rng.random_range(0.0..2.0 * PI);
    (0..k)
        .map(|i| {
            let a = phase + 2.0 * PI * i as f64 / k as f64;
            let r = radius * rng.random_range(0.6..=1.0);
            center + Vec2::new(a.cos(), a.sin()) * r
        })
        .collect()
}

const MAX_SHAPES: usize = 400;

fn shape_candidates(
    rule: &PlacementRule,
    models: &[String],
    extent: Rect,
    free_area: f64,
    kind: ShapeKind,
    rng: &mut StageRng,
) -> Vec<Candidate> {
    let target = rule.coverage_fraction * free_area;
    let mut covered = 0.0;
    let mut out = Vec::new();
    let mut shapes = 0usize;
    while covered < target && shapes < MAX_SHAPES {
        shapes += 1;
        let center = Vec2::new(
            rng.random_range(extent.min[0]..=extent.max[0]),
            rng.random_range(extent.min[1]..=extent.max[1]),
        );
        let shape = match kind {
            ShapeKind::Forest => Shape::Polygon(star_polygon(center, rng.random_range(12.0..=30.0), rng)),
            ShapeKind::Scatter if rng.random_bool(0.3) => {
                let inner = rng.random_range(4.0..=12.0);
                Shape::Ring { center, inner, outer: inner + rng.random_range(3.0..=6.0) }
            }
            ShapeKind::Scatter => Shape::Polygon(star_polygon(center, rng.random_range(6.0..=18.0), rng)),
        };
        covered += shape.area();
        // Scatter shapes hold one model each; forests mix species.
        let shape_model = pick_model(models, rng);
        let (lo, hi) = shape.bbox();
        let step = rule.interval;
        let nx = ((hi.x - lo.x) / step).ceil() as usize + 1;
        let ny = ((hi.y - lo.y) / step).ceil() as usize + 1;
        for iy in 0..ny {
            for ix in 0..nx {
                let jitter = Vec2::new(rng.random_range(-0.3..=0.3), rng.random_range(-0.3..=0.3)) * step;
                let p = lo + Vec2::new(ix as f64 * step, iy as f64 * step) + jitter;
                if !shape.contains(p) {
                    continue;
                }
                let model = match kind {
                    ShapeKind::Forest => pick_model(models, rng),
                    ShapeKind::Scatter => shape_model.clone(),
                };
                out.push(Candidate {
                    pos: p,
                    yaw: draw_yaw(rule, rng),
                    model,
                    scale: draw_scale(rule, rng),
                });
            }
        }
    }
    out
}
