//! Footprint extrusion into closed labeled building prisms.

use super::footprint::{BuildingFootprint, RoofKind, WindowLayout};
use super::terrain::HeightField;
use super::SceneError;
use crate::class::SemanticClass;
use crate::geom::{point_in_polygon, triangulate_polygon, Vec2, Vec3};
use crate::mesh::LabeledMesh;

/// Terrain elevation range under a footprint, sampled at the ring vertices,
/// along the edges at cell spacing and at every grid node inside the ring.
pub fn terrain_range_under(ring: &[Vec2], hf: &HeightField) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sample = |p: Vec2| {
        let z = hf.height_at(p.x, p.y);
        lo = lo.min(z);
        hi = hi.max(z);
    };
    let n = ring.len();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let steps = ((b - a).norm() / hf.cell_size).ceil().max(1.0) as usize;
        for s in 0..steps {
            sample(a + (b - a) * (s as f64 / steps as f64));
        }
    }
    let (min_x, max_x) = ring.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let (min_y, max_y) = ring.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.y), b.max(p.y)));
    let c0 = ((min_x - hf.origin[0]) / hf.cell_size).floor().max(0.0) as usize;
    let c1 = (((max_x - hf.origin[0]) / hf.cell_size).ceil().max(0.0) as usize).min(hf.cols - 1);
    let r0 = ((min_y - hf.origin[1]) / hf.cell_size).floor().max(0.0) as usize;
    let r1 = (((max_y - hf.origin[1]) / hf.cell_size).ceil().max(0.0) as usize).min(hf.rows - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            let p = hf.node_xy(r, c);
            if point_in_polygon(p, ring) {
                sample(p);
            }
        }
    }
    (lo, hi)
}

/// Extrudes every footprint; building `i` gets instance id `i + 1`.
pub fn extrude_buildings(footprints: &[BuildingFootprint], hf: &HeightField) -> Result<LabeledMesh, SceneError> {
    extrude_buildings_from(footprints, hf, 1)
}

/// As [`extrude_buildings`] with building `i` getting `first_instance + i`.
pub fn extrude_buildings_from(footprints: &[BuildingFootprint], hf: &HeightField, first_instance: u32) -> Result<LabeledMesh, SceneError> {
    let extent = hf.extent();
    let mut mesh = LabeledMesh::new();
    for (i, fp) in footprints.iter().enumerate() {
        let ring = fp.validated_ring(i)?;
        if ring.iter().any(|p| !extent.contains(*p)) {
            return Err(SceneError::FootprintOutsideTerrain { index: i });
        }
        let (z_low, z_seat) = terrain_range_under(&ring, hf);
        extrude_one(&mut mesh, &ring, z_low, z_seat, fp, first_instance + i as u32);
    }
    Ok(mesh)
}

/// Walls run from the lowest terrain point under the ring up to the eave,
/// which sits `height` above the highest terrain point.
fn extrude_one(mesh: &mut LabeledMesh, ring: &[Vec2], z_low: f64, z_seat: f64, fp: &BuildingFootprint, instance: u32) {
    let z_eave = z_seat + fp.height;
    let n = ring.len();
    let building = SemanticClass::Building;

    // Base, facing down.
    for t in triangulate_polygon(ring) {
        let p = |k: usize| Vec3::new(ring[t[k]].x, ring[t[k]].y, z_low);
        mesh.push_triangle(p(0), p(2), p(1), building, instance);
    }

    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        emit_wall(mesh, a, b, z_low, z_seat, z_eave, fp.style.windows.as_ref(), instance);
    }

    let gable = match fp.style.roof {
        RoofKind::Gable => gable_layout(ring),
        RoofKind::Flat => None,
    };
    match gable {
        Some(q) => {
            let short = 0.5 * ((q[2] - q[1]).norm() + (q[0] - q[3]).norm());
            let z_ridge = z_eave + 0.35 * short;
            let m12 = 0.5 * (q[1] + q[2]);
            let m30 = 0.5 * (q[3] + q[0]);
            let e = |p: Vec2| Vec3::new(p.x, p.y, z_eave);
            let r = |p: Vec2| Vec3::new(p.x, p.y, z_ridge);
            mesh.push_triangle(e(q[0]), e(q[1]), r(m12), building, instance);
            mesh.push_triangle(e(q[0]), r(m12), r(m30), building, instance);
            mesh.push_triangle(e(q[2]), e(q[3]), r(m30), building, instance);
            mesh.push_triangle(e(q[2]), r(m30), r(m12), building, instance);
            mesh.push_triangle(e(q[1]), e(q[2]), r(m12), building, instance);
            mesh.push_triangle(e(q[3]), e(q[0]), r(m30), building, instance);
        }
        None => {
            for t in triangulate_polygon(ring) {
                let p = |k: usize| Vec3::new(ring[t[k]].x, ring[t[k]].y, z_eave);
                mesh.push_triangle(p(0), p(1), p(2), building, instance);
            }
        }
    }
}

/// For a convex quadrilateral, returns the ring rotated so that edges 0-1
/// and 2-3 are the long (eave) sides.
fn gable_layout(ring: &[Vec2]) -> Option<[Vec2; 4]> {
    if ring.len() != 4 {
        return None;
    }
    for i in 0..4 {
        let a = ring[i];
        let b = ring[(i + 1) % 4];
        let c = ring[(i + 2) % 4];
        let cross = (b - a).perp(&(c - b));
        if cross <= 0.0 {
            return None;
        }
    }
    let len = |i: usize| (ring[(i + 1) % 4] - ring[i]).norm();
    if len(0) + len(2) >= len(1) + len(3) {
        Some([ring[0], ring[1], ring[2], ring[3]])
    } else {
        Some([ring[1], ring[2], ring[3], ring[0]])
    }
}

/// Splits the wall into a grid of coplanar quads, labeling window cells.
#[allow(clippy::too_many_arguments)]
fn emit_wall(mesh: &mut LabeledMesh, a: Vec2, b: Vec2, z_low: f64, z_seat: f64, z_eave: f64, windows: Option<&WindowLayout>, instance: u32) {
    let len = (b - a).norm();
    let mut u_breaks = vec![0.0];
    let mut v_breaks = vec![z_low];
    let mut window_cols = Vec::new();
    let mut window_rows = Vec::new();
    if let Some(w) = windows {
        let cols = if len >= w.spacing { (len / w.spacing).floor() as usize } else { 0 };
        let floors = ((z_eave - z_seat) / w.floor_height).floor() as usize;
        if cols > 0 && floors > 0 {
            let margin = 0.5 * (len - cols as f64 * w.spacing);
            for k in 0..cols {
                let u0 = margin + k as f64 * w.spacing + 0.5 * (w.spacing - w.width);
                window_cols.push(u_breaks.len());
                u_breaks.push(u0);
                u_breaks.push(u0 + w.width);
            }
            for f in 0..floors {
                let v0 = z_seat + f as f64 * w.floor_height + w.sill;
                let v1 = v0 + w.height;
                if v1 > z_eave - 0.2 {
                    break;
                }
                if v0 <= *v_breaks.last().unwrap() {
                    continue;
                }
                window_rows.push(v_breaks.len());
                v_breaks.push(v0);
                v_breaks.push(v1);
            }
        }
    }
    u_breaks.push(len);
    v_breaks.push(z_eave);
    if window_rows.is_empty() {
        window_cols.clear();
    }

    let dir = (b - a) / len;
    let at = |u: f64, z: f64| {
        let p = a + dir * u;
        Vec3::new(p.x, p.y, z)
    };
    for i in 0..u_breaks.len() - 1 {
        for j in 0..v_breaks.len() - 1 {
            let (u0, u1) = (u_breaks[i], u_breaks[i + 1]);
            let (v0, v1) = (v_breaks[j], v_breaks[j + 1]);
            if u1 - u0 <= 1e-9 || v1 - v0 <= 1e-9 {
                continue;
            }
            let is_window = window_cols.contains(&i) && window_rows.contains(&j);
            let class = if is_window { SemanticClass::Window } else { SemanticClass::Building };
            mesh.push_quad(at(u0, v0), at(u1, v0), at(u1, v1), at(u0, v1), class, instance);
        }
    }
}
