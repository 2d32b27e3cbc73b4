use serde::{Deserialize, Serialize};

use crate::features::FeatureTensor;
use crate::mathcore::Matrix;

use super::CspError;

const L2_PENALTY: f64 = 1e-3;
const ITERATIONS: usize = 500;
const LEARNING_RATE: f64 = 0.1;

/// Multinomial logistic (softmax) regression over flat feature vectors —
/// the separability sanity check run on CSP features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    weights: Matrix,
    bias: Vec<f64>,
    n_classes: usize,
}

impl LinearBaseline {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                self.bias[c]
                    + self
                        .weights
                        .row(c)
                        .iter()
                        .zip(x)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect()
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(f64::MIN, |m, &v| m.max(v));
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Full-batch gradient descent on the softmax cross-entropy with an L2
/// penalty on the weights (bias unpenalized). Zero initialization makes the
/// fit deterministic.
pub fn fit_linear_baseline(features: &FeatureTensor) -> Result<LinearBaseline, CspError> {
    let n_classes = features.n_classes();
    let present: std::collections::BTreeSet<usize> =
        features.labels().iter().copied().collect();
    if present.len() < 2 {
        return Err(CspError::InsufficientData(format!(
            "baseline needs at least 2 classes present, got {}",
            present.len()
        )));
    }
    let n = features.n_trials();
    let d = features.n_features();

    let mut weights = Matrix::zeros(n_classes, d);
    let mut bias = vec![0.0; n_classes];
    let inv_n = 1.0 / n as f64;

    for _ in 0..ITERATIONS {
        let mut grad_w = Matrix::zeros(n_classes, d);
        let mut grad_b = vec![0.0; n_classes];
        for t in 0..n {
            let x = features.trial(t);
            let scores: Vec<f64> = (0..n_classes)
                .map(|c| {
                    bias[c] + weights.row(c).iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            let p = softmax(&scores);
            let label = features.labels()[t];
            for c in 0..n_classes {
                let err = (p[c] - if c == label { 1.0 } else { 0.0 }) * inv_n;
                grad_b[c] += err;
                for (g, v) in grad_w.row_mut(c).iter_mut().zip(x) {
                    *g += err * v;
                }
            }
        }
        for c in 0..n_classes {
            let w = weights.row_mut(c);
            let g = grad_w.row(c);
            for (wv, gv) in w.iter_mut().zip(g) {
                *wv -= LEARNING_RATE * (gv + 2.0 * L2_PENALTY * *wv);
            }
            bias[c] -= LEARNING_RATE * grad_b[c];
        }
    }

    Ok(LinearBaseline {
        weights,
        bias,
        n_classes,
    })
}

/// Argmax class per trial.
pub fn predict_baseline(model: &LinearBaseline, features: &FeatureTensor) -> Vec<usize> {
    (0..features.n_trials())
        .map(|t| {
            let scores = model.scores(features.trial(t));
            scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(c, _)| c)
                .unwrap()
        })
        .collect()
}
