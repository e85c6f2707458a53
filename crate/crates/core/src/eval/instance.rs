//! Instance segmentation average precision.
//!
//! Within each class, predictions are taken by descending confidence (ties
//! by lower prediction index). Each one claims the still-unmatched ground
//! truth instance of largest point-set IoU (ties by lower index) when that
//! IoU reaches the threshold, otherwise it is a false positive. Precision
//! is interpolated at the 101 recall levels 0, 0.01, ..., 1. IoU is
//! compared against thresholds in double precision.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtInstance {
    pub class: u8,
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub class: u8,
    pub points: Vec<usize>,
    pub confidence: f64,
}

/// IoU thresholds 0.50, 0.55, ..., 0.95 followed by 0.25.
pub struct ScanNetThresholds;

impl ScanNetThresholds {
    pub fn band() -> Vec<f64> {
        (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
    }

    pub fn all() -> Vec<f64> {
        let mut t = Self::band();
        t.push(0.25);
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class: u8,
    pub gt_count: usize,
    pub pred_count: usize,
    /// AP per threshold, aligned with [`ApTable::thresholds`].
    pub ap: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApTable {
    pub thresholds: Vec<f64>,
    /// Every class with a ground truth instance or a prediction, by id.
    pub classes: Vec<ClassAp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApSummary {
    pub class: u8,
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
}

impl ApTable {
    fn column(&self, t: f64) -> Option<usize> {
        self.thresholds.iter().position(|&x| x == t)
    }

    pub fn ap_at(&self, class: u8, t: f64) -> Option<f64> {
        let col = self.column(t)?;
        self.classes.iter().find(|c| c.class == class).map(|c| c.ap[col])
    }

    /// Per class AP (mean over 0.50:0.05:0.95), AP50 and AP25, followed by
    /// the class means. Classes without ground truth enter the means only
    /// when `include_prediction_only` is set.
    pub fn summary(&self, include_prediction_only: bool) -> Result<(Vec<ApSummary>, ApSummary), EvalError> {
        let missing = |t: f64| EvalError::InvalidParameter(format!("threshold {t} was not evaluated"));
        let band: Vec<usize> =
            ScanNetThresholds::band().into_iter().map(|t| self.column(t).ok_or_else(|| missing(t))).collect::<Result<_, _>>()?;
        let c50 = self.column(0.5).ok_or_else(|| missing(0.5))?;
        let c25 = self.column(0.25).ok_or_else(|| missing(0.25))?;
        let rows: Vec<ApSummary> = self
            .classes
            .iter()
            .map(|c| ApSummary {
                class: c.class,
                ap: band.iter().map(|&i| c.ap[i]).sum::<f64>() / band.len() as f64,
                ap50: c.ap[c50],
                ap25: c.ap[c25],
            })
            .collect();
        let counted: Vec<&ApSummary> = rows
            .iter()
            .zip(&self.classes)
            .filter(|(_, c)| c.gt_count > 0 || include_prediction_only)
            .map(|(r, _)| r)
            .collect();
        let n = counted.len().max(1) as f64;
        let mean = ApSummary {
            class: u8::MAX,
            ap: counted.iter().map(|r| r.ap).sum::<f64>() / n,
            ap50: counted.iter().map(|r| r.ap50).sum::<f64>() / n,
            ap25: counted.iter().map(|r| r.ap25).sum::<f64>() / n,
        };
        Ok((rows, mean))
    }
}

fn sorted_unique(points: &[usize]) -> Vec<usize> {
    let mut v = points.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Point-set IoU of two sorted, duplicate-free index lists.
pub fn set_iou(a: &[usize], b: &[usize]) -> f64 {
    let inter = intersection(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 { 0.0 } else { inter as f64 / union as f64 }
}

/// 101-point interpolated AP from true-positive flags in ranked order.
pub fn interpolated_ap(tp_flags: &[bool], gt_count: usize) -> f64 {
    if gt_count == 0 || tp_flags.is_empty() {
        return 0.0;
    }
    let mut tp = Vec::with_capacity(tp_flags.len());
    let mut acc = 0usize;
    for &f in tp_flags {
        acc += f as usize;
        tp.push(acc);
    }
    let mut envelope: Vec<f64> = tp.iter().enumerate().map(|(k, &t)| t as f64 / (k + 1) as f64).collect();
    for k in (0..envelope.len() - 1).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for level in 0..=100usize {
        // Recall tp/gt reaches level/100.
        while k < tp.len() && tp[k] * 100 < level * gt_count {
            k += 1;
        }
        if k == tp.len() {
            break;
        }
        sum += envelope[k];
    }
    sum / 101.0
}

/// Greedy TP flags for one class in ranked order. `iou[p][g]` holds the
/// IoU of ranked prediction `p` with ground truth `g`.
pub fn greedy_match(iou: &[Vec<f64>], threshold: f64) -> Vec<bool> {
    let gt_n = iou.first().map_or(0, Vec::len);
    let mut taken = vec![false; gt_n];
    iou.iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &v) in row.iter().enumerate() {
                if !taken[g] && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            match best {
                Some((g, v)) if v >= threshold => {
                    taken[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

pub fn instance_ap(
    gt: &[GtInstance],
    preds: &[InstancePrediction],
    point_count: usize,
    thresholds: &[f64],
) -> Result<ApTable, EvalError> {
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(EvalError::InvalidParameter("IoU thresholds must lie in [0, 1]".into()));
    }
    for (i, p) in preds.iter().enumerate() {
        if p.points.is_empty() {
            return Err(EvalError::EmptyInstance(i));
        }
        if let Some(&point) = p.points.iter().find(|&&q| q >= point_count) {
            return Err(EvalError::PointOutOfRange { prediction: i, point, points: point_count });
        }
    }
    let mut by_class: BTreeMap<u8, (Vec<Vec<usize>>, Vec<(f64, usize)>)> = BTreeMap::new();
    for g in gt {
        by_class.entry(g.class).or_default().0.push(sorted_unique(&g.points));
    }
    for (i, p) in preds.iter().enumerate() {
        by_class.entry(p.class).or_default().1.push((p.confidence, i));
    }
    let classes = by_class
        .into_par_iter()
        .map(|(class, (gts, mut ranked))| {
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let iou: Vec<Vec<f64>> = ranked
                .iter()
                .map(|&(_, i)| {
                    let p = sorted_unique(&preds[i].points);
                    gts.iter().map(|g| set_iou(&p, g)).collect()
                })
                .collect();
            let ap = thresholds.iter().map(|&t| interpolated_ap(&greedy_match(&iou, t), gts.len())).collect();
            ClassAp { class, gt_count: gts.len(), pred_count: ranked.len(), ap }
        })
        .collect();
    Ok(ApTable { thresholds: thresholds.to_vec(), classes })
}

/// Ground truth instances from per-point labels: one per distinct
/// `(semantic, instance)` pair with a non-zero instance id, ordered by that
/// pair. Points whose class is not in `classes` are ignored.
pub fn instances_from_labels(semantic: &[u8], instance: &[u32], classes: &[u8]) -> Vec<GtInstance> {
    let mut groups: BTreeMap<(u8, u32), Vec<usize>> = BTreeMap::new();
    for (i, (&s, &id)) in semantic.iter().zip(instance).enumerate() {
        if id != 0 && classes.contains(&s) {
            groups.entry((s, id)).or_default().push(i);
        }
    }
    groups.into_iter().map(|((class, _), points)| GtInstance { class, points }).collect()
}
