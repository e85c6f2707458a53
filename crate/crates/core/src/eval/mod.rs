//! Segmentation scoring: confusion matrices, IoU / accuracy and instance AP.

pub mod instance;
pub mod report;
pub mod semantic;

use thiserror::Error;

pub use instance::{instance_ap, instances_from_labels, ApSummary, ApTable, ClassAp, GtInstance, InstancePrediction, ScanNetThresholds};
pub use report::{instance_report_csv, semantic_report_csv, SegmentationReport};
pub use semantic::{confusion, semantic_scores, ConfusionMatrix, SemanticScores};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("label arrays differ in length: {gt} ground truth, {pred} predicted")]
    LengthMismatch { gt: usize, pred: usize },
    #[error("label {label} is not below the class count {classes}")]
    LabelOutOfRange { label: u8, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("prediction {prediction} references point {point} of {points}")]
    PointOutOfRange { prediction: usize, point: usize, points: usize },
    #[error("instance {0} has no points")]
    EmptyInstance(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
