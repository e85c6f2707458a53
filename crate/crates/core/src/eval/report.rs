//! Score tables as CSV and JSON. Values are percentages in the tables and
//! fractions in JSON.

use serde::{Deserialize, Serialize};

use super::instance::{ApSummary, ApTable};
use super::semantic::SemanticScores;
use super::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub class_names: Vec<String>,
    pub semantic: Option<SemanticScores>,
    pub instance_classes: Vec<ApSummary>,
    pub instance_mean: Option<ApSummary>,
}

impl SegmentationReport {
    pub fn new(class_names: Vec<String>, semantic: Option<SemanticScores>, ap: Option<&ApTable>, include_prediction_only: bool) -> Result<Self, EvalError> {
        let (instance_classes, instance_mean) = match ap {
            Some(t) => {
                let (rows, mean) = t.summary(include_prediction_only)?;
                (rows, Some(mean))
            }
            None => (Vec::new(), None),
        };
        Ok(SegmentationReport { class_names, semantic, instance_classes, instance_mean })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// `mIoU,oAcc` then one IoU column per class, in class id order. Classes
/// absent from both ground truth and prediction print as `-`.
pub fn semantic_report_csv(scores: &SemanticScores, names: &[String]) -> String {
    let mut header = vec!["mIoU".to_string(), "oAcc".to_string()];
    let mut row = vec![pct(scores.miou), pct(scores.oacc)];
    for (c, iou) in scores.iou.iter().enumerate() {
        header.push(names.get(c).cloned().unwrap_or_else(|| format!("class_{c}")));
        row.push(iou.map_or("-".into(), pct));
    }
    format!("{}\n{}\n", header.join(","), row.join(","))
}

/// Rows `AP`, `AP50`, `AP25`; columns `Metric,mean` then one column per
/// class named in `names` (by class id), `-` where the class has no entry.
pub fn instance_report_csv(rows: &[ApSummary], mean: &ApSummary, names: &[String]) -> String {
    let mut s = format!("Metric,mean,{}\n", names.join(","));
    let metrics: [(&str, fn(&ApSummary) -> f64); 3] = [("AP", |r| r.ap), ("AP50", |r| r.ap50), ("AP25", |r| r.ap25)];
    for (label, get) in metrics {
        let mut line = vec![label.to_string(), pct(get(mean))];
        for c in 0..names.len() {
            line.push(rows.iter().find(|r| r.class as usize == c).map_or("-".into(), |r| pct(get(r))));
        }
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}
