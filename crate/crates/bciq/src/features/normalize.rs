use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureTensor};

const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerKind {
    /// Per feature, map the training min/max to [-1, 1]; out-of-range values
    /// are clipped.
    MinmaxSym,
    /// Standardize each feature over trials (statistics fitted on the
    /// training set), then standardize each trial over its own features.
    ZscoreTwofold,
}

/// Fitted normalization statistics. Only obtainable through
/// [`fit_normalizer`], so applying an unfitted state cannot be expressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerState {
    kind: NormalizerKind,
    /// Per feature: (min, max) for minmax, (mean, std) for zscore.
    per_feature: Vec<(f64, f64)>,
}

impl NormalizerState {
    pub fn kind(&self) -> NormalizerKind {
        self.kind
    }

    pub fn per_feature(&self) -> &[(f64, f64)] {
        &self.per_feature
    }
}

/// Fit normalization statistics on the training tensor only.
pub fn fit_normalizer(
    train: &FeatureTensor,
    kind: NormalizerKind,
) -> Result<NormalizerState, FeatureError> {
    let n_features = train.n_features();
    let n_trials = train.n_trials();
    if n_trials == 0 {
        return Err(FeatureError::DegenerateInput(
            "cannot fit a normalizer on zero trials".into(),
        ));
    }
    let mut per_feature = Vec::with_capacity(n_features);
    match kind {
        NormalizerKind::MinmaxSym => {
            for f in 0..n_features {
                let mut lo = f64::MAX;
                let mut hi = f64::MIN;
                for t in 0..n_trials {
                    let v = train.trial(t)[f];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                per_feature.push((lo, hi));
            }
        }
        NormalizerKind::ZscoreTwofold => {
            for f in 0..n_features {
                let mean =
                    (0..n_trials).map(|t| train.trial(t)[f]).sum::<f64>() / n_trials as f64;
                let var = (0..n_trials)
                    .map(|t| (train.trial(t)[f] - mean).powi(2))
                    .sum::<f64>()
                    / n_trials as f64;
                per_feature.push((mean, var.sqrt().max(STD_FLOOR)));
            }
        }
    }
    Ok(NormalizerState { kind, per_feature })
}

/// Apply fitted statistics to any tensor with the same feature layout.
pub fn apply_normalizer(
    state: &NormalizerState,
    tensor: &FeatureTensor,
) -> Result<FeatureTensor, FeatureError> {
    if tensor.n_features() != state.per_feature.len() {
        return Err(FeatureError::InvalidParameter(format!(
            "normalizer fitted on {} features, tensor has {}",
            state.per_feature.len(),
            tensor.n_features()
        )));
    }
    let data: Vec<Vec<f64>> = (0..tensor.n_trials())
        .map(|t| {
            let row = tensor.trial(t);
            match state.kind {
                NormalizerKind::MinmaxSym => row
                    .iter()
                    .zip(&state.per_feature)
                    .map(|(&v, &(lo, hi))| {
                        let span = (hi - lo).max(STD_FLOOR);
                        (2.0 * (v - lo) / span - 1.0).clamp(-1.0, 1.0)
                    })
                    .collect(),
                NormalizerKind::ZscoreTwofold => {
                    let pass1: Vec<f64> = row
                        .iter()
                        .zip(&state.per_feature)
                        .map(|(&v, &(mean, std))| (v - mean) / std)
                        .collect();
                    let n = pass1.len() as f64;
                    let trial_mean = pass1.iter().sum::<f64>() / n;
                    let trial_var =
                        pass1.iter().map(|v| (v - trial_mean).powi(2)).sum::<f64>() / n;
                    let trial_std = trial_var.sqrt().max(STD_FLOOR);
                    pass1.iter().map(|v| (v - trial_mean) / trial_std).collect()
                }
            }
        })
        .collect();
    FeatureTensor::new(
        tensor.layout(),
        data,
        tensor.labels().to_vec(),
        tensor.n_classes(),
        tensor.feature_names().to_vec(),
    )
}
