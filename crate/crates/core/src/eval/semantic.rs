//! Semantic segmentation scores.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Row = ground truth, column = prediction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        ConfusionMatrix { classes, counts: vec![0; classes * classes] }
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn add(&mut self, gt: usize, pred: usize, n: u64) {
        self.counts[gt * self.classes + pred] += n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.classes).all(|i| (0..self.classes).all(|j| i == j || self.get(i, j) == 0))
    }
}

/// Counts label pairs. Points whose ground truth is `ignore` (for example
/// unlabeled) are skipped when `ignore` is given.
pub fn confusion(gt: &[u8], pred: &[u8], classes: usize, ignore: Option<u8>) -> Result<ConfusionMatrix, EvalError> {
    if gt.len() != pred.len() {
        return Err(EvalError::LengthMismatch { gt: gt.len(), pred: pred.len() });
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&g, &p) in gt.iter().zip(pred) {
        if Some(g) == ignore {
            continue;
        }
        for label in [g, p] {
            if label as usize >= classes {
                return Err(EvalError::LabelOutOfRange { label, classes });
            }
        }
        cm.add(g as usize, p as usize, 1);
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticScores {
    /// Per class `(tp, tp + fp + fn)`, kept as integers so callers can
    /// compare exactly.
    pub iou_terms: Vec<(u64, u64)>,
    /// Per class IoU; `None` for classes absent from both ground truth and
    /// prediction, which are left out of the mean.
    pub iou: Vec<Option<f64>>,
    pub miou: f64,
    pub oacc: f64,
    pub correct: u64,
    pub total: u64,
}

impl SemanticScores {
    pub fn vacuous_classes(&self) -> Vec<usize> {
        (0..self.iou.len()).filter(|&c| self.iou[c].is_none()).collect()
    }
}

pub fn semantic_scores(cm: &ConfusionMatrix) -> Result<SemanticScores, EvalError> {
    let total = cm.total();
    if cm.classes == 0 || total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.classes;
    let iou_terms: Vec<(u64, u64)> = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let row: u64 = (0..k).map(|j| cm.get(c, j)).sum();
            let col: u64 = (0..k).map(|i| cm.get(i, c)).sum();
            (tp, row + col - tp)
        })
        .collect();
    let iou: Vec<Option<f64>> = iou_terms.iter().map(|&(tp, u)| (u > 0).then(|| tp as f64 / u as f64)).collect();
    let present: Vec<f64> = iou.iter().flatten().copied().collect();
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    let correct = cm.trace();
    Ok(SemanticScores { iou_terms, iou, miou, oacc: correct as f64 / total as f64, correct, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_diagonal() {
        let labels = [0u8, 1, 2, 2, 1];
        let cm = confusion(&labels, &labels, 3, None).unwrap();
        assert!(cm.is_diagonal());
        let s = semantic_scores(&cm).unwrap();
        assert_eq!(s.iou, vec![Some(1.0); 3]);
        assert_eq!((s.miou, s.oacc), (1.0, 1.0));
    }

    #[test]
    fn single_off_diagonal() {
        let cm = confusion(&[0, 0, 0], &[1, 1, 1], 2, None).unwrap();
        assert_eq!(cm.counts, vec![0, 3, 0, 0]);
    }

    #[test]
    fn hand_worked_two_class() {
        let cm = ConfusionMatrix { classes: 2, counts: vec![5, 5, 0, 10] };
        let s = semantic_scores(&cm).unwrap();
        assert_eq!(s.iou_terms, vec![(5, 10), (10, 15)]);
        assert!((s.miou - 7.0 / 12.0).abs() < 1e-15);
        assert_eq!(s.oacc, 0.75);
    }

    #[test]
    fn vacuous_class_is_excluded() {
        let cm = confusion(&[0, 1], &[0, 1], 3, None).unwrap();
        let s = semantic_scores(&cm).unwrap();
        assert_eq!(s.vacuous_classes(), vec![2]);
        assert_eq!(s.miou, 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion(&[0], &[0, 1], 2, None), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(confusion(&[0], &[4], 2, None), Err(EvalError::LabelOutOfRange { .. })));
        assert_eq!(semantic_scores(&ConfusionMatrix::zeros(3)), Err(EvalError::EmptyMatrix));
        assert_eq!(confusion(&[255, 0], &[0, 0], 2, Some(255)).unwrap().total(), 1);
    }
}
