//! The end-to-end experiment: load or synthesize trials, bandpass-filter,
//! split, fit CSP and the feature normalizer on the training side only,
//! train the DQN agent, and score the held-out side. Optionally repeats the
//! whole fit per cross-validation fold and writes the report to disk as
//! JSON plus a flat CSV of per-fold rows.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{
    compute_metrics, generate_synthetic, kfold_indices, load_dataset, stratified_split, AppError,
    RunConfig,
};
use crate::csp::{csp_space_transform, fit_csp_ovr_with, CspOvrModel};
use crate::dsp::{design_butterworth_bandpass, filtfilt, EpochSet};
use crate::features::{apply_normalizer, assemble_2d, fit_normalizer, FeatureTensor, NormalizerState};
use crate::mathcore::Rng;
use crate::qnet::{forward, Mode, QNetworkParams, QNetworkSpec};
use crate::rl::{
    dqn_train, evaluate_reward_accuracy, greedy_action, ClassificationEnv, IntervalSummary,
    TrainingLog,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const REWARD_ACCURACY_FORMULA: &str =
    "mean greedy episode return / (n_test_trials * r_correct), clamped to [0, 1]";

/// Held-out scores for one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub reward_based_accuracy: f64,
}

/// Mean or standard deviation of [`FoldOutcome`] scores across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAggregate {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub reward_based_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub seed: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub support: Vec<usize>,
    pub reward_based_accuracy: f64,
    pub reward_accuracy_formula: String,
    pub training_intervals: Vec<IntervalSummary>,
    pub refused_steps: usize,
    pub folds: Vec<FoldOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold_mean: Option<FoldAggregate>,
    /// Sample standard deviation (n-1 denominator) across folds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold_std: Option<FoldAggregate>,
    pub runtime_s: f64,
    pub timestamp_unix_s: u64,
    pub config: RunConfig,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String, AppError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| AppError::Format(format!("report serialization: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<MetricsReport, AppError> {
        serde_json::from_str(text).map_err(|e| AppError::Format(format!("report parse: {e}")))
    }

    /// One row per fold, ready for mean/std summaries in external tooling.
    pub fn fold_csv(&self) -> String {
        let mut out =
            String::from("fold,accuracy,macro_precision,macro_recall,macro_f1,reward_based_accuracy\n");
        for f in &self.folds {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                f.fold,
                f.accuracy,
                f.macro_precision,
                f.macro_recall,
                f.macro_f1,
                f.reward_based_accuracy
            ));
        }
        out
    }
}

/// Everything fitted on the training split of the primary run, for
/// inspection, persistence, and leakage checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineArtifacts {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub csp: CspOvrModel,
    pub normalizer: NormalizerState,
    pub spec: QNetworkSpec,
    pub params: QNetworkParams,
}

struct SplitOutcome {
    metrics: super::ClassificationMetrics,
    reward_based_accuracy: f64,
    log: TrainingLog,
    csp: CspOvrModel,
    normalizer: NormalizerState,
    spec: QNetworkSpec,
    params: QNetworkParams,
}

/// Everything the feature stage fits and produces for one train/test split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedFeatures {
    pub csp: CspOvrModel,
    pub normalizer: NormalizerState,
    pub train: FeatureTensor,
    pub test: FeatureTensor,
}

pub fn run_pipeline(config: &RunConfig, out_dir: Option<&Path>) -> Result<MetricsReport, AppError> {
    run_pipeline_full(config, out_dir).map(|(report, _)| report)
}

/// [`run_pipeline`] returning the fitted artifacts alongside the report.
pub fn run_pipeline_full(
    config: &RunConfig,
    out_dir: Option<&Path>,
) -> Result<(MetricsReport, PipelineArtifacts), AppError> {
    let started = Instant::now();
    config.validate()?;
    let root = Rng::new(config.seed);

    let raw = load_or_generate(config).map_err(|e| AppError::in_stage("dataset", e))?;
    let epochs = preprocess_epochs(config, &raw).map_err(|e| AppError::in_stage("preprocess", e))?;

    let (train_idx, test_idx) = stratified_split(epochs.labels(), config.eval.test_fraction, config.seed)
        .map_err(|e| AppError::in_stage("split", e))?;
    let holdout = run_split(config, &epochs, &train_idx, &test_idx, &root, "")?;

    let mut folds = Vec::new();
    if config.eval.folds >= 2 {
        let fold_sets = kfold_indices(epochs.labels(), config.eval.folds, config.seed)
            .map_err(|e| AppError::in_stage("split", e))?;
        for (f, test) in fold_sets.iter().enumerate() {
            let in_test = |t: &usize| test.contains(t);
            let train: Vec<usize> = (0..epochs.n_trials()).filter(|t| !in_test(t)).collect();
            let outcome = run_split(config, &epochs, &train, test, &root, &format!("fold{f}."))?;
            folds.push(FoldOutcome {
                fold: f,
                accuracy: outcome.metrics.accuracy,
                macro_precision: outcome.metrics.macro_precision,
                macro_recall: outcome.metrics.macro_recall,
                macro_f1: outcome.metrics.macro_f1,
                reward_based_accuracy: outcome.reward_based_accuracy,
            });
        }
    }
    let (fold_mean, fold_std) = aggregate_folds(&folds);

    let report = MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: config.seed,
        accuracy: holdout.metrics.accuracy,
        macro_precision: holdout.metrics.macro_precision,
        macro_recall: holdout.metrics.macro_recall,
        macro_f1: holdout.metrics.macro_f1,
        confusion: holdout.metrics.confusion.clone(),
        support: holdout.metrics.support.clone(),
        reward_based_accuracy: holdout.reward_based_accuracy,
        reward_accuracy_formula: REWARD_ACCURACY_FORMULA.to_string(),
        training_intervals: holdout.log.intervals.clone(),
        refused_steps: holdout.log.refused_steps,
        folds,
        fold_mean,
        fold_std,
        runtime_s: started.elapsed().as_secs_f64(),
        timestamp_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: config.clone(),
    };
    if let Some(dir) = out_dir {
        write_outputs(dir, &report)?;
    }
    let artifacts = PipelineArtifacts {
        train_indices: train_idx,
        test_indices: test_idx,
        csp: holdout.csp,
        normalizer: holdout.normalizer,
        spec: holdout.spec,
        params: holdout.params,
    };
    Ok((report, artifacts))
}

/// Dataset acquisition as the pipeline performs it: read the configured
/// file when a path is set, otherwise synthesize from the config seed.
pub fn load_or_generate(config: &RunConfig) -> Result<EpochSet, AppError> {
    match &config.dataset.path {
        Some(path) => load_dataset(path),
        None => {
            let s = &config.dataset.synthetic;
            let (epochs, _) = generate_synthetic(
                s.n_classes,
                s.trials_per_class,
                s.channels,
                s.samples,
                s.sample_rate_hz,
                config.seed,
            )?;
            Ok(epochs)
        }
    }
}

/// Zero-phase bandpass on every channel of every trial, then the optional
/// epoch crop. Strictly per-trial, so no sample crosses trial boundaries.
pub fn preprocess_epochs(config: &RunConfig, epochs: &EpochSet) -> Result<EpochSet, AppError> {
    let [lo, hi] = config.preprocessing.band_hz;
    let cascade = design_butterworth_bandpass(
        lo,
        hi,
        epochs.sample_rate_hz(),
        config.preprocessing.filter_order,
    )?;
    let mut filtered = Vec::with_capacity(epochs.n_trials());
    for trial in epochs.trials() {
        let mut out = trial.clone();
        for ch in 0..out.rows() {
            let y = filtfilt(&cascade, trial.row(ch))?;
            out.row_mut(ch).copy_from_slice(&y);
        }
        filtered.push(out);
    }
    let mut set = EpochSet::new(
        filtered,
        epochs.labels().to_vec(),
        epochs.n_classes(),
        epochs.sample_rate_hz(),
        epochs.window_s(),
    )?;
    if let Some([t0, t1]) = config.preprocessing.epoch_s {
        set = set.crop(t0, t1)?;
    }
    Ok(set)
}

/// Fits CSP and the feature normalizer on the training rows only, then maps
/// both halves of the split through them.
pub fn fit_features(
    config: &RunConfig,
    epochs: &EpochSet,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<FittedFeatures, AppError> {
    let train_epochs = epochs.select(train_idx).map_err(|e| AppError::in_stage("csp", e))?;
    let test_epochs = epochs.select(test_idx).map_err(|e| AppError::in_stage("csp", e))?;
    let csp = fit_csp_ovr_with(&train_epochs, config.csp.m, config.csp.shrinkage)
        .map_err(|e| AppError::in_stage("csp", e))?;
    let csp_train = csp_space_transform(&csp, &train_epochs).map_err(|e| AppError::in_stage("csp", e))?;
    let csp_test = csp_space_transform(&csp, &test_epochs).map_err(|e| AppError::in_stage("csp", e))?;

    let bands: Vec<(f64, f64)> = config.features.bands_hz.iter().map(|&[a, b]| (a, b)).collect();
    let welch = config.welch();
    let feats_train = assemble_2d(csp_train.epochs(), &bands, &welch)
        .map_err(|e| AppError::in_stage("features", e))?;
    let feats_test = assemble_2d(csp_test.epochs(), &bands, &welch)
        .map_err(|e| AppError::in_stage("features", e))?;
    let normalizer = fit_normalizer(&feats_train, config.features.normalizer)
        .map_err(|e| AppError::in_stage("features", e))?;
    let train = apply_normalizer(&normalizer, &feats_train)
        .map_err(|e| AppError::in_stage("features", e))?;
    let test = apply_normalizer(&normalizer, &feats_test)
        .map_err(|e| AppError::in_stage("features", e))?;
    Ok(FittedFeatures { csp, normalizer, train, test })
}

/// Initializes a Q-network sized for `train` and runs the interval-driven
/// training loop on it.
pub fn train_agent(
    config: &RunConfig,
    train: FeatureTensor,
    root: &Rng,
    stream_prefix: &str,
) -> Result<(QNetworkSpec, QNetworkParams, TrainingLog), AppError> {
    let n_classes = train.n_classes();
    let shape = train.trial_matrix(0);
    let spec = config.qnet_spec(shape.rows(), shape.cols(), n_classes);
    let mut init_rng = root.stream(&format!("{stream_prefix}init"));
    let mut params = QNetworkParams::init(&spec, &mut init_rng);
    let reward = config.reward()?;
    let schedule = config.schedule()?;
    let hyper = config.hyper();
    let mut env = ClassificationEnv::new(train, reward);
    let mut train_rng = root.stream(&format!("{stream_prefix}train"));
    let log = dqn_train(
        &mut env,
        &spec,
        &mut params,
        &schedule,
        &config.rl.intervals,
        &hyper,
        &mut train_rng,
    )
    .map_err(|e| AppError::in_stage("train", e))?;
    Ok((spec, params, log))
}

/// Greedy test-set metrics plus the reward-based accuracy from full
/// evaluation episodes.
pub fn score_agent(
    config: &RunConfig,
    test: FeatureTensor,
    spec: &QNetworkSpec,
    params: &QNetworkParams,
    root: &Rng,
    stream_prefix: &str,
) -> Result<(super::ClassificationMetrics, f64), AppError> {
    let n_classes = test.n_classes();
    let states: Vec<_> = (0..test.n_trials()).map(|t| test.trial_matrix(t)).collect();
    let (q_values, _) =
        forward(params, spec, &states, Mode::Inference, None).map_err(|e| AppError::in_stage("eval", e))?;
    let predicted = q_values
        .iter()
        .map(|q| greedy_action(q))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| AppError::in_stage("eval", e))?;
    let metrics = compute_metrics(test.labels(), &predicted, n_classes)
        .map_err(|e| AppError::in_stage("eval", e))?;

    let reward = config.reward()?;
    let mut test_env = ClassificationEnv::new(test, reward);
    let mut eval_rng = root.stream(&format!("{stream_prefix}eval"));
    let reward_based_accuracy = evaluate_reward_accuracy(
        &mut test_env,
        spec,
        params,
        config.eval.episodes,
        &mut eval_rng,
    )
    .map_err(|e| AppError::in_stage("eval", e))?;
    Ok((metrics, reward_based_accuracy))
}

/// Fit on `train_idx`, score on `test_idx`. `stream_prefix` keeps the named
/// randomness streams of cross-validation folds disjoint from the primary
/// run and from each other.
fn run_split(
    config: &RunConfig,
    epochs: &EpochSet,
    train_idx: &[usize],
    test_idx: &[usize],
    root: &Rng,
    stream_prefix: &str,
) -> Result<SplitOutcome, AppError> {
    let fitted = fit_features(config, epochs, train_idx, test_idx)?;
    let FittedFeatures { csp, normalizer, train, test } = fitted;
    let (spec, params, log) = train_agent(config, train, root, stream_prefix)?;
    let (metrics, reward_based_accuracy) =
        score_agent(config, test, &spec, &params, root, stream_prefix)?;
    Ok(SplitOutcome {
        metrics,
        reward_based_accuracy,
        log,
        csp,
        normalizer,
        spec,
        params,
    })
}

fn aggregate_folds(folds: &[FoldOutcome]) -> (Option<FoldAggregate>, Option<FoldAggregate>) {
    if folds.len() < 2 {
        return (None, None);
    }
    let n = folds.len() as f64;
    let mean = |get: &dyn Fn(&FoldOutcome) -> f64| folds.iter().map(|f| get(f)).sum::<f64>() / n;
    let std = |get: &dyn Fn(&FoldOutcome) -> f64, mu: f64| {
        (folds.iter().map(|f| (get(f) - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let acc = mean(&|f| f.accuracy);
    let pre = mean(&|f| f.macro_precision);
    let rec = mean(&|f| f.macro_recall);
    let f1 = mean(&|f| f.macro_f1);
    let rba = mean(&|f| f.reward_based_accuracy);
    let mean_agg = FoldAggregate {
        accuracy: acc,
        macro_precision: pre,
        macro_recall: rec,
        macro_f1: f1,
        reward_based_accuracy: rba,
    };
    let std_agg = FoldAggregate {
        accuracy: std(&|f| f.accuracy, acc),
        macro_precision: std(&|f| f.macro_precision, pre),
        macro_recall: std(&|f| f.macro_recall, rec),
        macro_f1: std(&|f| f.macro_f1, f1),
        reward_based_accuracy: std(&|f| f.reward_based_accuracy, rba),
    };
    (Some(mean_agg), Some(std_agg))
}

/// Writes `report.json` and `folds.csv` through temporary files so a failed
/// run leaves no partial outputs behind.
fn write_outputs(dir: &Path, report: &MetricsReport) -> Result<(), AppError> {
    std::fs::create_dir_all(dir)?;
    let json_tmp = dir.join("report.json.tmp");
    let csv_tmp = dir.join("folds.csv.tmp");
    let result = (|| -> Result<(), AppError> {
        std::fs::write(&json_tmp, report.to_json()?)?;
        std::fs::write(&csv_tmp, report.fold_csv())?;
        std::fs::rename(&json_tmp, dir.join("report.json"))?;
        std::fs::rename(&csv_tmp, dir.join("folds.csv"))?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&json_tmp);
        let _ = std::fs::remove_file(&csv_tmp);
    }
    result
}
