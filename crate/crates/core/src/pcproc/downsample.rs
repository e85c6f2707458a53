//! Voxel-grid downsampling.

use std::collections::BTreeMap;

use super::PcError;
use crate::cloud::LabeledPointCloud;
use crate::geom::Vec3;

/// Most frequent value; ties go to the smallest.
fn majority<T: Ord + Copy>(values: impl Iterator<Item = T>) -> T {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut best: Option<(T, usize)> = None;
    for (v, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((v, n));
        }
    }
    best.expect("non-empty voxel").0
}

/// Voxel of `p` in a grid of edge `spacing` anchored at `origin`.
pub fn voxel_key(p: &Vec3, origin: &Vec3, spacing: f64) -> [i64; 3] {
    let k = (p - origin) / spacing;
    [k.x.floor() as i64, k.y.floor() as i64, k.z.floor() as i64]
}

/// Keeps one point per occupied voxel, anchored at the cloud's minimum
/// corner: the input point closest to the voxel centroid (lowest index on
/// ties), with the voxel's majority class and majority instance. Output is
/// ordered by voxel.
pub fn grid_downsample(cloud: &LabeledPointCloud, spacing: f64) -> Result<LabeledPointCloud, PcError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(PcError::InvalidParameter(format!("spacing {spacing} must be positive")));
    }
    if cloud.is_empty() {
        return Ok(cloud.clone());
    }
    let origin = cloud.bounds().min;
    let mut keyed: Vec<([i64; 3], usize)> =
        cloud.positions.iter().enumerate().map(|(i, p)| (voxel_key(p, &origin, spacing), i)).collect();
    keyed.sort_unstable();
    let mut out = LabeledPointCloud::with_capacity(0, cloud.colors.is_some());
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 {
            end += 1;
        }
        let members = &keyed[start..end];
        let centroid = members.iter().map(|&(_, i)| cloud.positions[i]).sum::<Vec3>() / members.len() as f64;
        // Members are in ascending index order, so `<` keeps the lowest.
        let mut rep = members[0].1;
        let mut rep_d = (cloud.positions[rep] - centroid).norm_squared();
        for &(_, i) in &members[1..] {
            let d = (cloud.positions[i] - centroid).norm_squared();
            if d < rep_d {
                rep = i;
                rep_d = d;
            }
        }
        let semantic = majority(members.iter().map(|&(_, i)| cloud.semantic[i]));
        let instance = majority(members.iter().map(|&(_, i)| cloud.instance[i]));
        let color = cloud.colors.as_ref().map(|c| c[rep]);
        out.push(cloud.positions[rep], color, semantic, instance);
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[[f64; 3]]) -> LabeledPointCloud {
        LabeledPointCloud::unlabeled(points.iter().map(|p| Vec3::from(*p)).collect(), None)
    }

    #[test]
    fn singleton_is_unchanged() {
        let c = cloud(&[[1.0, 2.0, 3.0]]);
        assert_eq!(grid_downsample(&c, 0.3).unwrap(), c);
    }

    #[test]
    fn close_pair_merges_and_far_pair_survives() {
        assert_eq!(grid_downsample(&cloud(&[[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]), 0.3).unwrap().len(), 1);
        assert_eq!(grid_downsample(&cloud(&[[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]), 0.3).unwrap().len(), 2);
    }

    #[test]
    fn majority_labels_with_small_id_ties() {
        let mut c = cloud(&[[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.2, 0.0, 0.0], [0.05, 0.05, 0.0]]);
        c.semantic = vec![5, 3, 5, 3];
        c.instance = vec![7, 7, 2, 2];
        let d = grid_downsample(&c, 0.3).unwrap();
        assert_eq!(d.semantic, vec![3]);
        assert_eq!(d.instance, vec![2]);
        // Centroid (0.0875, 0.0125, 0): nearest member is index 1.
        assert_eq!(d.positions[0], Vec3::new(0.1, 0.0, 0.0));
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(grid_downsample(&cloud(&[[0.0; 3]]), 0.0).is_err());
    }
}
