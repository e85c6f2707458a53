//! Label transfer from the proxy cloud and the ground connectivity pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{is_ground_family_id, SemanticClass, UNLABELED};
use crate::cloud::LabeledPointCloud;
use crate::geom::Vec3;
use crate::spatial::KdTree;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("the proxy cloud is empty")]
    EmptyProxy,
    #[error("the proxy cloud has {0} unlabeled points")]
    UnlabeledProxy(usize),
    #[error("invalid transfer parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    pub max_nn_distance: f64,
    pub ground_link_radius: f64,
    pub fallback_class: SemanticClass,
}

impl Default for TransferParams {
    fn default() -> Self {
        TransferParams {
            max_nn_distance: 1.0,
            ground_link_radius: 0.6,
            fallback_class: SemanticClass::Clutter,
        }
    }
}

impl TransferParams {
    pub fn validate(&self) -> Result<(), AnnotateError> {
        if !(self.max_nn_distance > 0.0) || !(self.ground_link_radius > 0.0) {
            return Err(AnnotateError::InvalidParameter(format!(
                "max_nn_distance {} and ground_link_radius {} must be positive",
                self.max_nn_distance, self.ground_link_radius
            )));
        }
        Ok(())
    }
}

pub fn build_point_index(proxy: &LabeledPointCloud) -> Result<KdTree, AnnotateError> {
    KdTree::build(&proxy.positions).ok_or(AnnotateError::EmptyProxy)
}

/// Nearest-neighbour transfer with a prebuilt index over `proxy`.
pub fn transfer_with_index(
    recon: &LabeledPointCloud,
    proxy: &LabeledPointCloud,
    index: &KdTree,
    params: &TransferParams,
) -> Result<LabeledPointCloud, AnnotateError> {
    Ok(transfer_counted(recon, proxy, index, params)?.0)
}

/// As [`transfer_with_index`], also returning how many points found no
/// proxy point in range and fell back.
pub fn transfer_counted(
    recon: &LabeledPointCloud,
    proxy: &LabeledPointCloud,
    index: &KdTree,
    params: &TransferParams,
) -> Result<(LabeledPointCloud, usize), AnnotateError> {
    params.validate()?;
    let unlabeled = proxy.unlabeled_count();
    if unlabeled > 0 {
        return Err(AnnotateError::UnlabeledProxy(unlabeled));
    }
    let labels: Vec<Option<(u8, u32)>> = recon
        .positions
        .par_iter()
        .map(|p| index.nearest_within(p, params.max_nn_distance).map(|n| (proxy.semantic[n.index], proxy.instance[n.index])))
        .collect();
    let mut out = recon.clone();
    let mut unmatched = 0;
    for (i, l) in labels.into_iter().enumerate() {
        let (s, inst) = l.unwrap_or_else(|| {
            unmatched += 1;
            (params.fallback_class.id(), 0)
        });
        out.semantic[i] = s;
        out.instance[i] = inst;
    }
    Ok((out, unmatched))
}

/// Each recon point takes the labels of its nearest proxy point within
/// `max_nn_distance` (lowest proxy index on ties), or the fallback class
/// with instance 0.
pub fn transfer_labels(recon: &LabeledPointCloud, proxy: &LabeledPointCloud, params: &TransferParams) -> Result<LabeledPointCloud, AnnotateError> {
    let index = build_point_index(proxy)?;
    transfer_with_index(recon, proxy, &index, params)
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub ground_points: usize,
    pub components: usize,
    pub kept: usize,
    pub relabeled: usize,
    /// Relabeled points with no non-ground neighbour in range.
    pub relabeled_to_fallback: usize,
    /// `true` when the cloud had no ground points and was left untouched.
    pub no_ground: bool,
}

/// Keeps the largest radius-connected component of ground-family points as
/// ground. Equal-size components resolve to the one holding the lowest point
/// index. Every other ground-family point takes the labels of its nearest
/// non-ground point within `max_nn_distance`, else the fallback class (or
/// clutter, if the fallback is itself a ground class) with instance 0.
pub fn enforce_ground_connectivity(
    cloud: &LabeledPointCloud,
    params: &TransferParams,
) -> Result<(LabeledPointCloud, ConnectivityReport), AnnotateError> {
    params.validate()?;
    let ground: Vec<usize> = (0..cloud.len()).filter(|&i| is_ground_family_id(cloud.semantic[i])).collect();
    let mut report = ConnectivityReport { ground_points: ground.len(), ..Default::default() };
    if ground.is_empty() {
        report.no_ground = true;
        return Ok((cloud.clone(), report));
    }
    let gpos: Vec<Vec3> = ground.iter().map(|&i| cloud.positions[i]).collect();
    let tree = KdTree::build(&gpos).expect("non-empty");
    let mut uf = UnionFind::new(ground.len());
    for (a, p) in gpos.iter().enumerate() {
        for b in tree.within_radius(p, params.ground_link_radius) {
            if b > a {
                uf.union(a as u32, b as u32);
            }
        }
    }
    // Ground positions are in ascending point order, so the first member
    // seen of each component is its lowest index.
    let mut sizes: Vec<(u32, usize)> = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for a in 0..ground.len() {
        let r = uf.find(a as u32);
        let e = seen.entry(r).or_insert_with(|| {
            sizes.push((r, 0));
            sizes.len() - 1
        });
        sizes[*e].1 += 1;
    }
    report.components = sizes.len();
    let (winner, kept) = sizes.iter().fold((u32::MAX, 0usize), |best, &(r, n)| if n > best.1 { (r, n) } else { best });
    report.kept = kept;

    let mut out = cloud.clone();
    let losers: Vec<usize> = (0..ground.len()).filter(|&a| uf.find(a as u32) != winner).collect();
    if losers.is_empty() {
        return Ok((out, report));
    }
    let fallback = if params.fallback_class.is_ground_family() { SemanticClass::Clutter } else { params.fallback_class };
    let others: Vec<usize> = (0..cloud.len()).filter(|&i| !is_ground_family_id(cloud.semantic[i]) && cloud.semantic[i] != UNLABELED).collect();
    let opos: Vec<Vec3> = others.iter().map(|&i| cloud.positions[i]).collect();
    let otree = KdTree::build(&opos);
    for a in losers {
        let i = ground[a];
        let hit = otree.as_ref().and_then(|t| t.nearest_within(&cloud.positions[i], params.max_nn_distance));
        match hit {
            Some(n) => {
                let j = others[n.index];
                out.semantic[i] = cloud.semantic[j];
                out.instance[i] = cloud.instance[j];
            }
            None => {
                out.semantic[i] = fallback.id();
                out.instance[i] = 0;
                report.relabeled_to_fallback += 1;
            }
        }
        report.relabeled += 1;
    }
    Ok((out, report))
}

/// Share of labeled points whose proxy neighbourhood within `radius` holds
/// more than one semantic class: the points where transfer can go wrong at
/// class boundaries.
pub fn boundary_fraction(cloud: &LabeledPointCloud, proxy: &LabeledPointCloud, index: &KdTree, radius: f64) -> f64 {
    if cloud.is_empty() {
        return 0.0;
    }
    let mixed = cloud
        .positions
        .par_iter()
        .filter(|p| {
            let near = index.within_radius(p, radius);
            near.iter().any(|&j| proxy.semantic[j] != proxy.semantic[near[0]])
        })
        .count();
    mixed as f64 / cloud.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[([f64; 3], SemanticClass, u32)]) -> LabeledPointCloud {
        let mut c = LabeledPointCloud::new();
        for (p, s, i) in points {
            c.push(Vec3::from(*p), None, s.id(), *i);
        }
        c
    }

    #[test]
    fn identical_positions_copy_labels() {
        let proxy = cloud(&[
            ([0.0, 0.0, 0.0], SemanticClass::Road, 0),
            ([1.0, 0.0, 0.0], SemanticClass::Vehicle, 4),
            ([0.0, 2.0, 1.0], SemanticClass::Building, 1),
        ]);
        let recon = LabeledPointCloud::unlabeled(proxy.positions.clone(), None);
        let out = transfer_labels(&recon, &proxy, &TransferParams::default()).unwrap();
        assert_eq!(out.semantic, proxy.semantic);
        assert_eq!(out.instance, proxy.instance);
    }

    #[test]
    fn nearest_wins_and_far_points_fall_back() {
        let proxy = cloud(&[
            ([0.1, 0.0, 0.0], SemanticClass::HighVegetation, 9),
            ([-0.5, 0.0, 0.0], SemanticClass::Ground, 0),
        ]);
        let recon = LabeledPointCloud::unlabeled(vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0)], None);
        let out = transfer_labels(&recon, &proxy, &TransferParams::default()).unwrap();
        assert_eq!(out.semantic, vec![SemanticClass::HighVegetation.id(), SemanticClass::Clutter.id()]);
        assert_eq!(out.instance, vec![9, 0]);
    }

    #[test]
    fn empty_or_unlabeled_proxy_is_an_error() {
        let recon = LabeledPointCloud::unlabeled(vec![Vec3::zeros()], None);
        assert!(matches!(
            transfer_labels(&recon, &LabeledPointCloud::new(), &TransferParams::default()),
            Err(AnnotateError::EmptyProxy)
        ));
        assert!(matches!(
            transfer_labels(&recon, &recon, &TransferParams::default()),
            Err(AnnotateError::UnlabeledProxy(1))
        ));
    }

    fn rooftop_fixture() -> LabeledPointCloud {
        let mut pts = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                pts.push(([x as f64 * 0.5, y as f64 * 0.5, 0.0], SemanticClass::Grass, 0));
            }
        }
        for x in 0..4 {
            pts.push(([20.0 + x as f64 * 0.5, 0.0, 8.0], SemanticClass::Building, 1));
        }
        pts.push(([21.0, 0.4, 8.0], SemanticClass::Road, 0));
        cloud(&pts)
    }

    #[test]
    fn rooftop_island_becomes_building() {
        let c = rooftop_fixture();
        let (out, report) = enforce_ground_connectivity(&c, &TransferParams::default()).unwrap();
        assert_eq!(report.components, 2);
        assert_eq!(report.relabeled, 1);
        let last = c.len() - 1;
        assert_eq!(out.semantic[last], SemanticClass::Building.id());
        assert_eq!(out.instance[last], 1);
        assert_eq!(&out.semantic[..last], &c.semantic[..last]);
        let (again, _) = enforce_ground_connectivity(&out, &TransferParams::default()).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn equal_components_keep_the_lowest_index() {
        let c = cloud(&[
            ([5.0, 0.0, 0.0], SemanticClass::Dirt, 0),
            ([0.0, 0.0, 0.0], SemanticClass::Grass, 0),
        ]);
        let (out, report) = enforce_ground_connectivity(&c, &TransferParams::default()).unwrap();
        assert_eq!(report.kept, 1);
        assert_eq!(out.semantic[0], SemanticClass::Dirt.id());
        assert_eq!(out.semantic[1], SemanticClass::Clutter.id());
    }

    #[test]
    fn no_ground_is_a_noop() {
        let c = cloud(&[([0.0, 0.0, 0.0], SemanticClass::Building, 1)]);
        let (out, report) = enforce_ground_connectivity(&c, &TransferParams::default()).unwrap();
        assert_eq!(out, c);
        assert!(report.no_ground);
    }
}
