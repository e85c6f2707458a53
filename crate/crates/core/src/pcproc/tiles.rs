//! Training tiles: XY blocks, spheres and fixed-size neighbourhoods.

use serde::{Deserialize, Serialize};

use super::PcError;
use crate::cloud::LabeledPointCloud;
use crate::geom::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TileBounds {
    Block { min: [f64; 2], max: [f64; 2] },
    Sphere { center: [f64; 3], radius: f64 },
    /// The `count` points nearest `center`; `radius` is the farthest taken.
    Nearest { center: [f64; 3], count: usize, radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tile {
    pub bounds: TileBounds,
    /// Source point indices, in tile order.
    pub indices: Vec<usize>,
    pub points: LabeledPointCloud,
    /// Set when fewer points than requested existed and indices repeat.
    pub padded: bool,
}

impl Tile {
    fn new(bounds: TileBounds, cloud: &LabeledPointCloud, indices: Vec<usize>, padded: bool) -> Self {
        Tile { bounds, points: cloud.select(&indices), indices, padded }
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), PcError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PcError::InvalidParameter(format!("{name} {v} must be positive")))
    }
}

/// Partitions the XY extent into square blocks of `edge`, anchored at the
/// minimum corner; the last row and column absorb the maximum. Only
/// non-empty blocks are returned, row by row.
pub fn tile_blocks(cloud: &LabeledPointCloud, edge: f64) -> Result<Vec<Tile>, PcError> {
    check_positive("edge", edge)?;
    if cloud.is_empty() {
        return Ok(Vec::new());
    }
    let b = cloud.bounds();
    let nx = (((b.max.x - b.min.x) / edge).ceil() as usize).max(1);
    let ny = (((b.max.y - b.min.y) / edge).ceil() as usize).max(1);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
    for (i, p) in cloud.positions.iter().enumerate() {
        let ix = (((p.x - b.min.x) / edge).floor() as usize).min(nx - 1);
        let iy = (((p.y - b.min.y) / edge).floor() as usize).min(ny - 1);
        buckets[iy * nx + ix].push(i);
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| {
            let (ix, iy) = ((k % nx) as f64, (k / nx) as f64);
            let min = [b.min.x + ix * edge, b.min.y + iy * edge];
            let max = [
                if k % nx == nx - 1 { b.max.x.max(min[0] + edge) } else { min[0] + edge },
                if k / nx == ny - 1 { b.max.y.max(min[1] + edge) } else { min[1] + edge },
            ];
            Tile::new(TileBounds::Block { min, max }, cloud, v, false)
        })
        .collect())
}

/// All points within `radius` (3D, inclusive) of `center`.
pub fn sample_sphere(cloud: &LabeledPointCloud, center: Vec3, radius: f64) -> Result<Tile, PcError> {
    check_positive("radius", radius)?;
    let r2 = radius * radius;
    let idx = (0..cloud.len()).filter(|&i| (cloud.positions[i] - center).norm_squared() <= r2).collect();
    Ok(Tile::new(TileBounds::Sphere { center: center.into(), radius }, cloud, idx, false))
}

/// The `n` points nearest `center` (ties by index), nearest first. With
/// fewer than `n` points the sorted set repeats cyclically and the tile is
/// flagged as padded.
pub fn sample_fixed_count(cloud: &LabeledPointCloud, center: Vec3, n: usize) -> Result<Tile, PcError> {
    if n == 0 {
        return Err(PcError::InvalidParameter("point count must be positive".into()));
    }
    let bounds = |radius| TileBounds::Nearest { center: center.into(), count: n, radius };
    if cloud.is_empty() {
        return Ok(Tile::new(bounds(0.0), cloud, Vec::new(), false));
    }
    let mut keyed: Vec<(f64, usize)> = cloud.positions.iter().enumerate().map(|(i, p)| ((p - center).norm_squared(), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if keyed.len() > n {
        keyed.select_nth_unstable_by(n - 1, cmp);
        keyed.truncate(n);
    }
    keyed.sort_unstable_by(cmp);
    let radius = keyed.last().map_or(0.0, |k| k.0.sqrt());
    let sorted: Vec<usize> = keyed.into_iter().map(|k| k.1).collect();
    let padded = sorted.len() < n;
    let idx = sorted.iter().copied().cycle().take(n).collect();
    Ok(Tile::new(bounds(radius), cloud, idx, padded))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, step: f64) -> LabeledPointCloud {
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                pts.push(Vec3::new(i as f64 * step, j as f64 * step, 0.0));
            }
        }
        LabeledPointCloud::unlabeled(pts, None)
    }

    #[test]
    fn blocks_partition() {
        let c = grid(100, 1.0);
        let tiles = tile_blocks(&c, 50.0).unwrap();
        assert_eq!(tiles.len(), 4);
        let mut all: Vec<usize> = tiles.iter().flat_map(|t| t.indices.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..c.len()).collect::<Vec<_>>());
        assert!(tile_blocks(&LabeledPointCloud::new(), 50.0).unwrap().is_empty());
    }

    #[test]
    fn big_sphere_takes_everything() {
        let c = grid(10, 1.0);
        assert_eq!(sample_sphere(&c, Vec3::new(5.0, 5.0, 0.0), 100.0).unwrap().indices.len(), c.len());
    }

    #[test]
    fn fixed_count_pads_when_short() {
        let c = grid(1, 1.0);
        let t = sample_fixed_count(&c, Vec3::zeros(), 10).unwrap();
        assert!(t.padded);
        assert_eq!(t.indices.len(), 10);
        assert_eq!(&t.indices[..4], &[0, 1, 2, 3]);
        assert_eq!(t.indices[4], 0);
        let t = sample_fixed_count(&c, Vec3::zeros(), 3).unwrap();
        assert!(!t.padded);
        assert_eq!(t.indices, vec![0, 1, 2]);
    }
}
