//! Confusion-matrix classification metrics: accuracy, per-class and macro
//! precision/recall/F1. Undefined ratios (empty class or empty prediction
//! column) are defined as 0 rather than NaN.

use serde::{Deserialize, Serialize};

use super::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub support: Vec<usize>,
    pub accuracy: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(
    true_labels: &[usize],
    predicted: &[usize],
    n_classes: usize,
) -> Result<ClassificationMetrics, AppError> {
    if true_labels.len() != predicted.len() {
        return Err(AppError::InvalidParameter(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    if true_labels.is_empty() {
        return Err(AppError::InsufficientData("no labels to score".into()));
    }
    if n_classes == 0 {
        return Err(AppError::InvalidParameter("n_classes must be positive".into()));
    }
    if let Some(&bad) = true_labels.iter().chain(predicted).find(|&&l| l >= n_classes) {
        return Err(AppError::InvalidParameter(format!(
            "label {bad} outside 0..{n_classes}"
        )));
    }

    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        confusion[t][p] += 1;
    }

    let total = true_labels.len();
    let trace: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let support: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
    let predicted_counts: Vec<usize> = (0..n_classes)
        .map(|p| confusion.iter().map(|row| row[p]).sum())
        .collect();

    let per_class_precision: Vec<f64> = (0..n_classes)
        .map(|c| ratio(confusion[c][c], predicted_counts[c]))
        .collect();
    let per_class_recall: Vec<f64> = (0..n_classes)
        .map(|c| ratio(confusion[c][c], support[c]))
        .collect();
    let per_class_f1: Vec<f64> = per_class_precision
        .iter()
        .zip(&per_class_recall)
        .map(|(&p, &r)| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
        .collect();

    let macro_mean = |v: &[f64]| v.iter().sum::<f64>() / n_classes as f64;
    Ok(ClassificationMetrics {
        accuracy: trace as f64 / total as f64,
        macro_precision: macro_mean(&per_class_precision),
        macro_recall: macro_mean(&per_class_recall),
        macro_f1: macro_mean(&per_class_f1),
        confusion,
        support,
        per_class_precision,
        per_class_recall,
        per_class_f1,
    })
}
