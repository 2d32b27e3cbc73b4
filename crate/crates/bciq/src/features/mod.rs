//! Per-trial feature extraction: the five signal statistics, band-limited
//! spectral power, tensor assembly, and train-fitted normalization.

mod assemble;
mod normalize;
mod stats;

pub use assemble::{assemble_1d, assemble_2d, band_power};
pub use normalize::{apply_normalizer, fit_normalizer, NormalizerKind, NormalizerState};
pub use stats::{abs_diff, kurtosis, peak_to_peak, rms, skewness, stat_vector, STAT_NAMES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::DspError;
use crate::mathcore::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("constant signal: {0}")]
    ConstantSignal(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureLayout {
    /// One flat vector per trial.
    Flat1d,
    /// `components` rows per trial, stored row-major; every row shares the
    /// per-component feature names.
    Grid2d { components: usize },
}

/// Per-trial feature rows with labels and self-describing feature names.
///
/// For [`FeatureLayout::Flat1d`] the names cover the whole vector; for
/// [`FeatureLayout::Grid2d`] they cover one row, repeated per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    layout: FeatureLayout,
    data: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
    feature_names: Vec<String>,
}

impl FeatureTensor {
    pub fn new(
        layout: FeatureLayout,
        data: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
        feature_names: Vec<String>,
    ) -> Result<Self, FeatureError> {
        if data.len() != labels.len() {
            return Err(FeatureError::InvalidParameter(format!(
                "{} trials but {} labels",
                data.len(),
                labels.len()
            )));
        }
        if data.is_empty() {
            return Err(FeatureError::DegenerateInput("no trials".into()));
        }
        let width = data[0].len();
        if width == 0 {
            return Err(FeatureError::DegenerateInput("empty feature rows".into()));
        }
        if let Some(t) = data.iter().position(|r| r.len() != width) {
            return Err(FeatureError::InvalidParameter(format!(
                "trial {t} has {} features, expected {width}",
                data[t].len()
            )));
        }
        if let Some(t) = data
            .iter()
            .position(|r| !r.iter().all(|v| v.is_finite()))
        {
            return Err(FeatureError::InvalidParameter(format!(
                "trial {t} contains a non-finite feature"
            )));
        }
        if let Some((t, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(FeatureError::InvalidParameter(format!(
                "trial {t} has label {l}, valid range is 0..{n_classes}"
            )));
        }
        let expected_names = match layout {
            FeatureLayout::Flat1d => width,
            FeatureLayout::Grid2d { components } => {
                if components == 0 || width % components != 0 {
                    return Err(FeatureError::InvalidParameter(format!(
                        "width {width} does not split into {components} components"
                    )));
                }
                width / components
            }
        };
        if feature_names.len() != expected_names {
            return Err(FeatureError::InvalidParameter(format!(
                "{} feature names for {expected_names} columns",
                feature_names.len()
            )));
        }
        Ok(Self {
            layout,
            data,
            labels,
            n_classes,
            feature_names,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn n_trials(&self) -> usize {
        self.data.len()
    }

    /// Total values per trial (components x columns for grid layout).
    pub fn n_features(&self) -> usize {
        self.data[0].len()
    }

    pub fn trial(&self, t: usize) -> &[f64] {
        &self.data[t]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Trial as a matrix: `1 x n` for flat layout, `components x columns`
    /// for grid layout. This is the shape the network consumes.
    pub fn trial_matrix(&self, t: usize) -> Matrix {
        let row = &self.data[t];
        match self.layout {
            FeatureLayout::Flat1d => {
                Matrix::new(1, row.len(), row.clone()).expect("validated at construction")
            }
            FeatureLayout::Grid2d { components } => {
                Matrix::new(components, row.len() / components, row.clone())
                    .expect("validated at construction")
            }
        }
    }

    /// Subset of trials by index, labels carried along.
    pub fn select(&self, indices: &[usize]) -> Result<FeatureTensor, FeatureError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_trials()) {
            return Err(FeatureError::InvalidParameter(format!(
                "trial index {bad} out of 0..{}",
                self.n_trials()
            )));
        }
        FeatureTensor::new(
            self.layout,
            indices.iter().map(|&i| self.data[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.n_classes,
            self.feature_names.clone(),
        )
    }
}
