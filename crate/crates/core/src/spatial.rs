//! Static k-d tree over 3D points.
//!
//! Every query answers exactly as a brute-force scan would: candidates are
//! ordered by `(squared distance, point index)`, and subtrees are pruned
//! only when their box is strictly farther than the current bound, so
//! equidistant points resolve to the lowest index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::{Aabb, Vec3};

const LEAF_SIZE: usize = 8;

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// First child for interior nodes, first slot for leaves.
    first: u32,
    count: u32,
}

#[derive(Clone, Debug)]
pub struct KdTree {
    nodes: Vec<Node>,
    points: Vec<Vec3>,
    ids: Vec<u32>,
}

/// Query result: index into the indexed point set and Euclidean distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(PartialEq)]
struct Entry(f64, u32);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl KdTree {
    /// Returns `None` for an empty point set.
    pub fn build(points: &[Vec3]) -> Option<KdTree> {
        if points.is_empty() {
            return None;
        }
        let mut ids: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = vec![Node { bounds: Aabb::empty(), first: 0, count: 0 }];
        let mut stack = vec![(0usize, 0usize, ids.len())];
        while let Some((node, lo, hi)) = stack.pop() {
            let bounds = Aabb::from_points(ids[lo..hi].iter().map(|&i| &points[i as usize]));
            nodes[node].bounds = bounds;
            let n = hi - lo;
            let e = bounds.extent();
            if n <= LEAF_SIZE || e.amax() == 0.0 {
                nodes[node].first = lo as u32;
                nodes[node].count = n as u32;
                continue;
            }
            let axis = e.imax();
            let mid = n / 2;
            ids[lo..hi].select_nth_unstable_by(mid, |&a, &b| {
                points[a as usize][axis].total_cmp(&points[b as usize][axis]).then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node { bounds: Aabb::empty(), first: 0, count: 0 });
            nodes.push(Node { bounds: Aabb::empty(), first: 0, count: 0 });
            nodes[node].first = left as u32;
            stack.push((left + 1, lo + mid, hi));
            stack.push((left, lo, lo + mid));
        }
        let pts = ids.iter().map(|&i| points[i as usize]).collect();
        Some(KdTree { nodes, points: pts, ids })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point with distance at most `max_distance`.
    pub fn nearest_within(&self, q: &Vec3, max_distance: f64) -> Option<Neighbor> {
        let mut best_d = max_distance * max_distance;
        let mut best: Option<u32> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds.distance_squared(q) > best_d {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                for k in s..s + node.count as usize {
                    let d = (self.points[k] - q).norm_squared();
                    let idx = self.ids[k];
                    if d < best_d || (d == best_d && best.is_none_or(|b| idx < b)) {
                        best_d = d;
                        best = Some(idx);
                    }
                }
            } else {
                let l = node.first as usize;
                let dl = self.nodes[l].bounds.distance_squared(q);
                let dr = self.nodes[l + 1].bounds.distance_squared(q);
                if dl <= dr {
                    stack.push(l as u32 + 1);
                    stack.push(l as u32);
                } else {
                    stack.push(l as u32);
                    stack.push(l as u32 + 1);
                }
            }
        }
        best.map(|i| Neighbor { index: i as usize, distance: best_d.sqrt() })
    }

    pub fn nearest(&self, q: &Vec3) -> Neighbor {
        self.nearest_within(q, f64::INFINITY).expect("tree is non-empty")
    }

    /// The `k` nearest points ordered by distance, then index.
    pub fn k_nearest(&self, q: &Vec3, k: usize) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Entry> = BinaryHeap::with_capacity(k + 1);
        let mut stack: Vec<u32> = vec![0];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if heap.len() == k && node.bounds.distance_squared(q) > heap.peek().unwrap().0 {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                for j in s..s + node.count as usize {
                    let e = Entry((self.points[j] - q).norm_squared(), self.ids[j]);
                    if heap.len() < k {
                        heap.push(e);
                    } else if e < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(e);
                    }
                }
            } else {
                let l = node.first as usize;
                let dl = self.nodes[l].bounds.distance_squared(q);
                let dr = self.nodes[l + 1].bounds.distance_squared(q);
                if dl <= dr {
                    stack.push(l as u32 + 1);
                    stack.push(l as u32);
                } else {
                    stack.push(l as u32);
                    stack.push(l as u32 + 1);
                }
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|Entry(d, i)| Neighbor { index: i as usize, distance: d.sqrt() })
            .collect()
    }

    /// Indices of all points within `radius` (inclusive), ascending.
    pub fn within_radius(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut stack: Vec<u32> = vec![0];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds.distance_squared(q) > r2 {
                continue;
            }
            if node.count > 0 {
                let s = node.first as usize;
                for j in s..s + node.count as usize {
                    if (self.points[j] - q).norm_squared() <= r2 {
                        out.push(self.ids[j] as usize);
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
