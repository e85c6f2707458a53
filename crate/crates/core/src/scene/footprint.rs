//! Building footprints, road networks and their GeoJSON ingestion.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SceneError;
use crate::geom::{is_simple_polygon, point_polyline_distance, signed_area, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RoofKind {
    #[default]
    Flat,
    /// Ridge along the long axis. Only quadrilateral convex footprints get a
    /// gable; anything else falls back to flat.
    Gable,
}

/// Regular grid of rectangular windows on every façade.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowLayout {
    pub floor_height: f64,
    /// Centre-to-centre distance between window columns.
    pub spacing: f64,
    pub width: f64,
    pub height: f64,
    /// Height of the sill above each floor level.
    pub sill: f64,
}

impl Default for WindowLayout {
    fn default() -> Self {
        WindowLayout {
            floor_height: 3.0,
            spacing: 3.0,
            width: 1.2,
            height: 1.4,
            sill: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct BuildingStyle {
    #[serde(default)]
    pub roof: RoofKind,
    #[serde(default)]
    pub windows: Option<WindowLayout>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingFootprint {
    /// Open ring (the closing vertex is not repeated), counter-clockwise.
    pub ring: Vec<[f64; 2]>,
    pub height: f64,
    #[serde(default)]
    pub style: BuildingStyle,
}

impl BuildingFootprint {
    pub fn new(ring: Vec<[f64; 2]>, height: f64, style: BuildingStyle) -> Self {
        BuildingFootprint { ring, height, style }
    }

    /// Axis-aligned rectangle footprint.
    pub fn rectangle(min: [f64; 2], max: [f64; 2], height: f64, style: BuildingStyle) -> Self {
        Self::new(
            vec![min, [max[0], min[1]], max, [min[0], max[1]]],
            height,
            style,
        )
    }

    pub fn points(&self) -> Vec<Vec2> {
        self.ring.iter().map(|p| Vec2::new(p[0], p[1])).collect()
    }

    /// Checks the footprint and returns its ring oriented counter-clockwise.
    pub fn validated_ring(&self, index: usize) -> Result<Vec<Vec2>, SceneError> {
        let invalid = |reason: String| SceneError::InvalidFootprint { index, reason };
        if self.ring.len() < 3 {
            return Err(invalid(format!("{} vertices, need at least 3", self.ring.len())));
        }
        if !(self.height > 0.0) || !self.height.is_finite() {
            return Err(invalid(format!("height {} must be positive", self.height)));
        }
        let mut ring = self.points();
        if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(invalid("non-finite vertex".into()));
        }
        if !is_simple_polygon(&ring) {
            return Err(invalid("ring is self-intersecting or degenerate".into()));
        }
        if signed_area(&ring) < 0.0 {
            ring.reverse();
        }
        Ok(ring)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub points: Vec<[f64; 2]>,
    pub width: f64,
}

impl RoadSegment {
    pub fn polyline(&self) -> Vec<Vec2> {
        self.points.iter().map(|p| Vec2::new(p[0], p[1])).collect()
    }

    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct RoadNetwork {
    pub segments: Vec<RoadSegment>,
}

impl RoadNetwork {
    pub fn validate(&self) -> Result<(), SceneError> {
        for (i, s) in self.segments.iter().enumerate() {
            if s.points.len() < 2 {
                return Err(SceneError::InvalidParameter(format!(
                    "road {i} has {} points, need at least 2",
                    s.points.len()
                )));
            }
            if !(s.width > 0.0) {
                return Err(SceneError::InvalidParameter(format!(
                    "road {i} width {} must be positive",
                    s.width
                )));
            }
        }
        Ok(())
    }

    /// Distance from `p` to the nearest road surface (0 on the road).
    pub fn distance_to_surface(&self, p: Vec2) -> f64 {
        self.segments
            .iter()
            .map(|s| (point_polyline_distance(p, &s.polyline()) - 0.5 * s.width).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn on_road(&self, p: Vec2) -> bool {
        self.segments
            .iter()
            .any(|s| point_polyline_distance(p, &s.polyline()) <= 0.5 * s.width)
    }
}

/// Footprints and roads read from a GeoJSON feature collection. Polygon
/// features need a numeric `height` property and may carry `roof`
/// (`"flat"`/`"gable"`) and `windows` (bool). LineString features need a
/// numeric `width`. Coordinates are taken as local metres.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeoLayers {
    pub footprints: Vec<BuildingFootprint>,
    pub roads: RoadNetwork,
}

pub fn parse_geojson(text: &str) -> Result<GeoLayers, SceneError> {
    let bad = |m: String| SceneError::Format(format!("geojson: {m}"));
    let doc: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("expected a FeatureCollection with `features`".into()))?;
    let coord = |v: &Value| -> Result<[f64; 2], SceneError> {
        let a = v.as_array().ok_or_else(|| bad("coordinate is not an array".into()))?;
        match (a.first().and_then(Value::as_f64), a.get(1).and_then(Value::as_f64)) {
            (Some(x), Some(y)) => Ok([x, y]),
            _ => Err(bad("coordinate needs two numbers".into())),
        }
    };
    let mut out = GeoLayers::default();
    for (i, f) in features.iter().enumerate() {
        let geom = f.get("geometry").ok_or_else(|| bad(format!("feature {i} has no geometry")))?;
        let props = f.get("properties").cloned().unwrap_or(Value::Null);
        let kind = geom.get("type").and_then(Value::as_str).unwrap_or("");
        let coords = geom
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| bad(format!("feature {i} has no coordinates")))?;
        match kind {
            "Polygon" => {
                let outer = coords
                    .first()
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad(format!("feature {i}: polygon without outer ring")))?;
                let mut ring = outer.iter().map(coord).collect::<Result<Vec<_>, _>>()?;
                if ring.len() > 1 && ring.first() == ring.last() {
                    ring.pop();
                }
                let height = props
                    .get("height")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| bad(format!("feature {i}: polygon needs numeric `height`")))?;
                let roof = match props.get("roof").and_then(Value::as_str) {
                    Some("gable") => RoofKind::Gable,
                    Some("flat") | None => RoofKind::Flat,
                    Some(other) => return Err(bad(format!("feature {i}: unknown roof `{other}`"))),
                };
                let windows = props
                    .get("windows")
                    .and_then(Value::as_bool)
                    .unwrap_or(false)
                    .then(WindowLayout::default);
                out.footprints
                    .push(BuildingFootprint::new(ring, height, BuildingStyle { roof, windows }));
            }
            "LineString" => {
                let points = coords.iter().map(coord).collect::<Result<Vec<_>, _>>()?;
                let width = props
                    .get("width")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| bad(format!("feature {i}: line needs numeric `width`")))?;
                out.roads.segments.push(RoadSegment { points, width });
            }
            other => return Err(bad(format!("feature {i}: unsupported geometry `{other}`"))),
        }
    }
    out.roads.validate()?;
    Ok(out)
}

/// Inverse of [`parse_geojson`].
pub fn to_geojson(layers: &GeoLayers) -> Value {
    let mut features = Vec::new();
    for fp in &layers.footprints {
        let mut ring: Vec<Value> = fp.ring.iter().map(|p| serde_json::json!([p[0], p[1]])).collect();
        if let Some(first) = ring.first().cloned() {
            ring.push(first);
        }
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": { "type": "Polygon", "coordinates": [ring] },
            "properties": {
                "height": fp.height,
                "roof": match fp.style.roof { RoofKind::Flat => "flat", RoofKind::Gable => "gable" },
                "windows": fp.style.windows.is_some(),
            }
        }));
    }
    for s in &layers.roads.segments {
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": { "type": "LineString", "coordinates": s.points },
            "properties": { "width": s.width }
        }));
    }
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}
