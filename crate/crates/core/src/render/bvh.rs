//! Bounding volume hierarchy over mesh triangles.
//!
//! Built with binned SAH splits. Queries return exactly what a brute-force
//! loop over all triangles would: the closest hit is the smallest `(t,
//! triangle index)` pair, so equal-distance hits resolve to the lowest index
//! regardless of tree layout. Node boxes are padded by a few ulps of the
//! scene scale so rounding in the slab test can never cull a triangle that
//! the exact triangle test would hit.

use super::RenderError;
use crate::geom::{closest_point_on_triangle, ray_triangle, Aabb, Ray, Vec3};
use crate::mesh::LabeledMesh;

const LEAF_SIZE: usize = 4;
const BINS: usize = 16;

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// First child for interior nodes, first triangle slot for leaves.
    first: u32,
    /// Triangle count; 0 marks an interior node.
    count: u32,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle vertices in leaf order.
    tris: Vec<[Vec3; 3]>,
    /// Mesh triangle index of each slot in `tris`.
    ids: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub triangle: usize,
    pub point: Vec3,
    pub distance: f64,
}

fn tri_bounds(t: &[Vec3; 3]) -> Aabb {
    Aabb::from_points(t.iter())
}

pub fn build_bvh(mesh: &LabeledMesh) -> Result<Bvh, RenderError> {
    if mesh.is_empty() {
        return Err(RenderError::EmptyMesh);
    }
    mesh.validate().map_err(RenderError::Mesh)?;
    let all: Vec<[Vec3; 3]> = (0..mesh.triangle_count()).map(|t| mesh.triangle_vertices(t)).collect();
    let scale = mesh
        .vertices
        .iter()
        .map(|v| v.amax())
        .fold(1.0, f64::max);
    let pad = scale * 1e-12 * 16.0;
    let centroids: Vec<Vec3> = all.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
    let boxes: Vec<Aabb> = all.iter().map(tri_bounds).collect();
    let mut order: Vec<u32> = (0..all.len() as u32).collect();
    let mut nodes = vec![Node { bounds: Aabb::empty(), first: 0, count: 0 }];
    let mut stack = vec![(0usize, 0usize, order.len())];
    while let Some((node, lo, hi)) = stack.pop() {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &i in &order[lo..hi] {
            bounds = bounds.merge(&boxes[i as usize]);
            cbounds.grow(&centroids[i as usize]);
        }
        bounds.min -= Vec3::repeat(pad);
        bounds.max += Vec3::repeat(pad);
        nodes[node].bounds = bounds;
        let n = hi - lo;
        let split = if n <= LEAF_SIZE { None } else { sah_split(&mut order[lo..hi], &centroids, &boxes, &cbounds) };
        match split {
            Some(mid) => {
                let left = nodes.len();
                nodes.push(Node { bounds: Aabb::empty(), first: 0, count: 0 });
                nodes.push(Node { bounds: Aabb::empty(), first: 0, count: 0 });
                nodes[node].first = left as u32;
                nodes[node].count = 0;
                stack.push((left + 1, lo + mid, hi));
                stack.push((left, lo, lo + mid));
            }
            None => {
                nodes[node].first = lo as u32;
                nodes[node].count = n as u32;
            }
        }
    }
    let tris = order.iter().map(|&i| all[i as usize]).collect();
    Ok(Bvh { nodes, tris, ids: order })
}

/// Partitions `items` and returns the split position, or `None` for a leaf.
fn sah_split(items: &mut [u32], centroids: &[Vec3], boxes: &[Aabb], cbounds: &Aabb) -> Option<usize> {
    let extent = cbounds.extent();
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let n = items.len();
    if extent[axis] <= 0.0 {
        // All centroids coincide: split by count so leaves stay small.
        return (n > 4 * LEAF_SIZE).then_some(n / 2);
    }
    let lo = cbounds.min[axis];
    let scale = BINS as f64 / extent[axis];
    let bin_of = |i: u32| (((centroids[i as usize][axis] - lo) * scale) as usize).min(BINS - 1);
    let mut counts = [0usize; BINS];
    let mut bin_boxes = [Aabb::empty(); BINS];
    for &i in items.iter() {
        let b = bin_of(i);
        counts[b] += 1;
        bin_boxes[b] = bin_boxes[b].merge(&boxes[i as usize]);
    }
    let mut best = (f64::INFINITY, 0usize);
    for split in 1..BINS {
        let (mut lb, mut rb) = (Aabb::empty(), Aabb::empty());
        let (mut lc, mut rc) = (0, 0);
        for b in 0..split {
            lb = lb.merge(&bin_boxes[b]);
            lc += counts[b];
        }
        for b in split..BINS {
            rb = rb.merge(&bin_boxes[b]);
            rc += counts[b];
        }
        if lc == 0 || rc == 0 {
            continue;
        }
        let cost = lb.surface_area() * lc as f64 + rb.surface_area() * rc as f64;
        if cost < best.0 {
            best = (cost, split);
        }
    }
    if !best.0.is_finite() {
        return (n > 4 * LEAF_SIZE).then_some(n / 2);
    }
    let mut mid = 0;
    for k in 0..n {
        if bin_of(items[k]) < best.1 {
            items.swap(k, mid);
            mid += 1;
        }
    }
    Some(mid)
}

impl Bvh {
    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Closest hit with `t` strictly inside `(t_min, t_max)`.
    pub fn closest_hit(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut best: Option<Hit> = None;
        let mut best_t = t_max;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            match node.bounds.ray_entry(&ray.origin, &inv, t_min, best_t) {
                Some(entry) if entry <= best_t => {}
                _ => continue,
            }
            if node.count > 0 {
                let s = node.first as usize;
                for k in s..s + node.count as usize {
                    let [a, b, c] = &self.tris[k];
                    if let Some(t) = ray_triangle(ray, a, b, c, t_min, t_max) {
                        let tri = self.ids[k] as usize;
                        let better = match best {
                            None => true,
                            Some(h) => t < h.t || (t == h.t && tri < h.triangle),
                        };
                        if better {
                            best = Some(Hit { t, triangle: tri });
                            best_t = t;
                        }
                    }
                }
            } else {
                let l = node.first;
                let r = l + 1;
                let el = self.nodes[l as usize].bounds.ray_entry(&ray.origin, &inv, t_min, best_t);
                let er = self.nodes[r as usize].bounds.ray_entry(&ray.origin, &inv, t_min, best_t);
                match (el, er) {
                    (Some(a), Some(b)) if a <= b => {
                        stack.push(r);
                        stack.push(l);
                    }
                    (Some(_), Some(_)) => {
                        stack.push(l);
                        stack.push(r);
                    }
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// `true` if any triangle is hit inside `(t_min, t_max)`.
    pub fn occluded(&self, ray: &Ray, t_min: f64, t_max: f64) -> bool {
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds.ray_entry(&ray.origin, &inv, t_min, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                if self.tris[s..s + node.count as usize]
                    .iter()
                    .any(|[a, b, c]| ray_triangle(ray, a, b, c, t_min, t_max).is_some())
                {
                    return true;
                }
            } else {
                stack.push(node.first);
                stack.push(node.first + 1);
            }
        }
        false
    }

    /// Closest surface point to `p`; ties go to the lowest triangle index.
    pub fn nearest(&self, p: &Vec3) -> Nearest {
        let mut best = Nearest { triangle: usize::MAX, point: *p, distance: f64::INFINITY };
        let mut best_sq = f64::INFINITY;
        let mut stack: Vec<u32> = vec![0];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds.distance_squared(p) > best_sq {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                for k in s..s + node.count as usize {
                    let [a, b, c] = &self.tris[k];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = (q - p).norm_squared();
                    let tri = self.ids[k] as usize;
                    if d < best_sq || (d == best_sq && tri < best.triangle) {
                        best_sq = d;
                        best = Nearest { triangle: tri, point: q, distance: 0.0 };
                    }
                }
            } else {
                let l = node.first as usize;
                let dl = self.nodes[l].bounds.distance_squared(p);
                let dr = self.nodes[l + 1].bounds.distance_squared(p);
                if dl <= dr {
                    stack.push(l as u32 + 1);
                    stack.push(l as u32);
                } else {
                    stack.push(l as u32);
                    stack.push(l as u32 + 1);
                }
            }
        }
        best.distance = best_sq.sqrt();
        best
    }

    /// Indices of all triangles within `radius` of `p`, ascending.
    pub fn triangles_within(&self, p: &Vec3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut stack: Vec<u32> = vec![0];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds.distance_squared(p) > r2 {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                for k in s..s + node.count as usize {
                    let [a, b, c] = &self.tris[k];
                    if (closest_point_on_triangle(p, a, b, c) - p).norm_squared() <= r2 {
                        out.push(self.ids[k] as usize);
                    }
                }
            } else {
                stack.push(node.first);
                stack.push(node.first + 1);
            }
        }
        out.sort_unstable();
        out
    }
}
