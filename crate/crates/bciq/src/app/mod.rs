//! Application layer: the dataset container format, synthetic data
//! generation, train/test splitting, classification metrics, run
//! configuration, and the end-to-end pipeline that strings every stage
//! together into a reproducible experiment.

mod config;
mod dataset;
mod metrics;
mod pipeline;
mod split;
mod synth;

use thiserror::Error;

use crate::csp::CspError;
use crate::dsp::DspError;
use crate::features::FeatureError;
use crate::qnet::QNetError;
use crate::rl::RlError;

pub use config::{default_config_toml, RunConfig};
pub use dataset::{load_dataset, save_dataset};
pub use metrics::{compute_metrics, ClassificationMetrics};
pub use pipeline::{
    fit_features, load_or_generate, preprocess_epochs, run_pipeline, run_pipeline_full,
    score_agent, train_agent, FittedFeatures, FoldAggregate, FoldOutcome, MetricsReport,
    PipelineArtifacts, REPORT_SCHEMA_VERSION,
};
pub use split::{kfold_indices, stratified_split};
pub use synth::{generate_synthetic, SynthProvenance};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{stage} stage failed: {cause}")]
    Stage { stage: String, cause: String },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    QNet(#[from] QNetError),
}

impl AppError {
    /// Tags an error with the pipeline stage it aborted, preserving the
    /// underlying cause text.
    pub fn in_stage(stage: &str, cause: impl std::fmt::Display) -> AppError {
        AppError::Stage {
            stage: stage.to_string(),
            cause: cause.to_string(),
        }
    }
}
