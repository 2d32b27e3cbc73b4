//! The Q-network: a 1-D convolutional front end feeding an LSTM, pooled
//! over time into a small dense stack. Implemented directly on f64 slices
//! so gradients can be audited against finite differences.
//!
//! The layer order is fixed: batch norm, conv(64, k7) + PReLU,
//! conv(128, k5) + PReLU, max pool 2, average pool 2, spatial dropout 0.1,
//! LSTM(128) over the remaining sequence, global max pool over time, then
//! dense 128 -> 64 -> actions. Parameters live in one flat vector
//! ([`QNetworkParams`]) so the optimizer and the finite-difference checks
//! see every weight the same way.

mod adam;
mod layers;
mod lstm;
mod network;
mod params;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureTensor;
use crate::mathcore::Matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use network::{backward, forward, regularization_loss, ForwardCache};
pub use params::{ParamIndex, QNetworkParams, Segment};

#[derive(Debug, Error)]
pub enum QNetError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite activation in {0}")]
    NumericOverflow(String),
    #[error("non-finite gradient: {0}")]
    NumericError(String),
    #[error("invalid state: {0}")]
    State(String),
}

/// Whether a forward pass uses batch statistics and dropout (training) or
/// running statistics and no dropout (inference). Action selection always
/// runs in inference mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// Output head: raw Q-values or a softmax over them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Linear,
    Softmax,
}

/// Architecture hyperparameters. Defaults mirror the published network;
/// every size is explicit so tiny configurations can be built for tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetworkSpec {
    pub channels_in: usize,
    pub time_in: usize,
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub max_pool: usize,
    pub avg_pool: usize,
    pub dropout_rate: f64,
    pub lstm_units: usize,
    pub dense_sizes: [usize; 2],
    pub n_actions: usize,
    pub l1: f64,
    pub l2: f64,
    pub head: HeadKind,
}

impl QNetworkSpec {
    /// The published architecture for a given input shape and action count.
    pub fn standard(channels_in: usize, time_in: usize, n_actions: usize) -> QNetworkSpec {
        QNetworkSpec {
            channels_in,
            time_in,
            conv1_filters: 64,
            conv1_kernel: 7,
            conv2_filters: 128,
            conv2_kernel: 5,
            max_pool: 2,
            avg_pool: 2,
            dropout_rate: 0.1,
            lstm_units: 128,
            dense_sizes: [128, 64],
            n_actions,
            l1: 0.01,
            l2: 0.01,
            head: HeadKind::Linear,
        }
    }

    /// Sequence length left after the two pooling stages.
    pub fn time_after_pools(&self) -> usize {
        (self.time_in / self.max_pool) / self.avg_pool
    }

    pub fn validate(&self) -> Result<(), QNetError> {
        let positive = [
            ("channels_in", self.channels_in),
            ("time_in", self.time_in),
            ("conv1_filters", self.conv1_filters),
            ("conv1_kernel", self.conv1_kernel),
            ("conv2_filters", self.conv2_filters),
            ("conv2_kernel", self.conv2_kernel),
            ("max_pool", self.max_pool),
            ("avg_pool", self.avg_pool),
            ("lstm_units", self.lstm_units),
            ("dense1", self.dense_sizes[0]),
            ("dense2", self.dense_sizes[1]),
            ("n_actions", self.n_actions),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(QNetError::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        if self.conv1_kernel > self.time_in || self.conv2_kernel > self.time_in {
            return Err(QNetError::InvalidParameter(format!(
                "kernel sizes ({}, {}) exceed the {}-step input",
                self.conv1_kernel, self.conv2_kernel, self.time_in
            )));
        }
        if self.time_after_pools() == 0 {
            return Err(QNetError::InvalidParameter(format!(
                "pooling {}x{} collapses a {}-step input to nothing",
                self.max_pool, self.avg_pool, self.time_in
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(QNetError::InvalidParameter(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.l1 < 0.0 || self.l2 < 0.0 {
            return Err(QNetError::InvalidParameter(
                "negative regularization strength".into(),
            ));
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn tiny_for_tests() -> QNetworkSpec {
        QNetworkSpec {
            channels_in: 2,
            time_in: 16,
            conv1_filters: 8,
            conv1_kernel: 7,
            conv2_filters: 4,
            conv2_kernel: 5,
            max_pool: 2,
            avg_pool: 2,
            dropout_rate: 0.1,
            lstm_units: 4,
            dense_sizes: [8, 4],
            n_actions: 3,
            l1: 0.01,
            l2: 0.01,
            head: HeadKind::Linear,
        }
    }
}

/// Lay feature trials out as network inputs: flat tensors become one
/// single-channel row, grid tensors become one channel per component.
pub fn reshape_features(tensor: &FeatureTensor) -> Vec<Matrix> {
    (0..tensor.n_trials()).map(|t| tensor.trial_matrix(t)).collect()
}
