//! Command-line front end for the bciq pipeline.
//!
//! `report` and `crossval` run the whole experiment in one shot. The other
//! verbs expose the pipeline stage by stage, chaining through artifact files
//! in the output directory: `synth` writes a dataset, `preprocess` writes
//! filtered epochs, `csp-fit` writes the fitted spatial filters and the
//! train/test split, `features` writes normalized feature tensors, `train`
//! writes a Q-network checkpoint, and `eval` scores that checkpoint. Every
//! stage derives its randomness from the single config seed, so a chained
//! run and a one-shot `report` with the same config agree exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use bciq::app::{
    generate_synthetic, load_dataset, load_or_generate, preprocess_epochs, run_pipeline,
    save_dataset, score_agent, stratified_split, train_agent, AppError, ClassificationMetrics,
    RunConfig,
};
use bciq::csp::{csp_space_transform, fit_csp_ovr_with, CspOvrModel};
use bciq::dsp::EpochSet;
use bciq::features::{
    apply_normalizer, assemble_2d, fit_normalizer, FeatureTensor, NormalizerState,
};
use bciq::mathcore::Rng;
use bciq::qnet::{QNetworkParams, QNetworkSpec};
use bciq::rl::TrainingLog;

const DATASET_FILE: &str = "dataset.mieg";
const PROVENANCE_FILE: &str = "provenance.json";
const PREPROCESSED_FILE: &str = "preprocessed.mieg";
const CSP_FILE: &str = "csp.json";
const FEATURES_FILE: &str = "features.json";
const CHECKPOINT_FILE: &str = "checkpoint.json";
const EVAL_FILE: &str = "eval.json";

#[derive(Parser)]
#[command(name = "bciq", version, about = "Motor-imagery EEG classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it with its provenance
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Bandpass-filter (and optionally crop) the configured dataset
    Preprocess {
        #[command(flatten)]
        common: Common,
    },
    /// Split the preprocessed epochs and fit OVR-CSP filters on the train side
    CspFit {
        #[command(flatten)]
        common: Common,
    },
    /// Project epochs through the fitted filters and extract normalized features
    Features {
        #[command(flatten)]
        common: Common,
    },
    /// Train the DQN agent on the train-side features
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a trained checkpoint on the test-side features
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full pipeline with k-fold cross-validation
    Crossval {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full pipeline once and write the metrics report
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration file (TOML); built-in defaults when omitted
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the configured seed
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Directory for stage artifacts and reports
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Override the reward structure as r_correct,r_incorrect
    #[arg(long, value_name = "R_C,R_I", allow_hyphen_values = true)]
    reward: Option<RewardArg>,

    /// Override the training intervals as comma-separated step counts
    #[arg(long, value_name = "A,B,...")]
    intervals: Option<IntervalsArg>,
}

#[derive(Clone, Debug)]
struct RewardArg {
    correct: f64,
    incorrect: f64,
}

impl FromStr for RewardArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 2 {
            return Err(format!("expected r_correct,r_incorrect, got {s:?}"));
        }
        let correct = parts[0]
            .trim()
            .parse()
            .map_err(|e| format!("r_correct {:?}: {e}", parts[0].trim()))?;
        let incorrect = parts[1]
            .trim()
            .parse()
            .map_err(|e| format!("r_incorrect {:?}: {e}", parts[1].trim()))?;
        Ok(RewardArg { correct, incorrect })
    }
}

#[derive(Clone, Debug)]
struct IntervalsArg(Vec<usize>);

impl FromStr for IntervalsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let steps = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|e| format!("interval {:?}: {e}", part.trim()))
            })
            .collect::<Result<Vec<usize>, String>>()?;
        if steps.is_empty() {
            return Err("expected at least one interval".into());
        }
        Ok(IntervalsArg(steps))
    }
}

/// Spatial filters plus the split they were fitted on.
#[derive(Serialize, Deserialize)]
struct CspArtifact {
    seed: u64,
    train_indices: Vec<usize>,
    test_indices: Vec<usize>,
    model: CspOvrModel,
}

/// Normalized feature tensors for both split sides and the statistics that
/// produced them.
#[derive(Serialize, Deserialize)]
struct FeaturesArtifact {
    seed: u64,
    normalizer: NormalizerState,
    train: FeatureTensor,
    test: FeatureTensor,
}

/// A trained Q-network with its architecture and training log.
#[derive(Serialize, Deserialize)]
struct CheckpointArtifact {
    seed: u64,
    spec: QNetworkSpec,
    params: QNetworkParams,
    log: TrainingLog,
}

/// Test-set scores for one checkpoint.
#[derive(Serialize, Deserialize)]
struct EvalArtifact {
    seed: u64,
    metrics: ClassificationMetrics,
    reward_based_accuracy: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Synth { common } => cmd_synth(&common),
        Command::Preprocess { common } => cmd_preprocess(&common),
        Command::CspFit { common } => cmd_csp_fit(&common),
        Command::Features { common } => cmd_features(&common),
        Command::Train { common } => cmd_train(&common),
        Command::Eval { common } => cmd_eval(&common),
        Command::Crossval { common } => cmd_crossval(&common),
        Command::Report { common } => cmd_report(&common),
    }
}

/// Loads the config (or defaults), applies command-line overrides, and
/// re-validates the result.
fn effective_config(common: &Common) -> Result<RunConfig, AppError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(reward) = &common.reward {
        config.rl.reward = [reward.correct, reward.incorrect];
    }
    if let Some(IntervalsArg(steps)) = &common.intervals {
        config.rl.intervals = steps.clone();
    }
    config.validate()?;
    Ok(config)
}

fn cmd_synth(common: &Common) -> Result<(), AppError> {
    let config = effective_config(common)?;
    let s = &config.dataset.synthetic;
    let (epochs, provenance) = generate_synthetic(
        s.n_classes,
        s.trials_per_class,
        s.channels,
        s.samples,
        s.sample_rate_hz,
        config.seed,
    )?;
    fs::create_dir_all(&common.out)?;
    let dataset_path = common.out.join(DATASET_FILE);
    save_dataset_atomic(&dataset_path, &epochs)?;
    write_json_atomic(&common.out.join(PROVENANCE_FILE), &provenance)?;
    println!(
        "wrote {} ({} trials, {} channels, {} samples @ {} Hz, {} classes)",
        dataset_path.display(),
        epochs.n_trials(),
        epochs.n_channels(),
        epochs.n_samples(),
        epochs.sample_rate_hz(),
        epochs.n_classes(),
    );
    Ok(())
}

fn cmd_preprocess(common: &Common) -> Result<(), AppError> {
    let config = effective_config(common)?;
    let raw = load_or_generate(&config).map_err(|e| AppError::in_stage("dataset", e))?;
    let epochs =
        preprocess_epochs(&config, &raw).map_err(|e| AppError::in_stage("preprocess", e))?;
    fs::create_dir_all(&common.out)?;
    let path = common.out.join(PREPROCESSED_FILE);
    save_dataset_atomic(&path, &epochs)?;
    let [lo, hi] = config.preprocessing.band_hz;
    println!(
        "wrote {} ({} trials, bandpassed {lo}-{hi} Hz, {} samples/trial)",
        path.display(),
        epochs.n_trials(),
        epochs.n_samples(),
    );
    Ok(())
}

fn cmd_csp_fit(common: &Common) -> Result<(), AppError> {
    let config = effective_config(common)?;
    let epochs = load_stage_dataset(&common.out, "preprocess")?;
    let (train_indices, test_indices) =
        stratified_split(epochs.labels(), config.eval.test_fraction, config.seed)?;
    let train = epochs.select(&train_indices)?;
    let model = fit_csp_ovr_with(&train, config.csp.m, config.csp.shrinkage)?;
    let artifact = CspArtifact {
        seed: config.seed,
        train_indices,
        test_indices,
        model,
    };
    let path = common.out.join(CSP_FILE);
    write_json_atomic(&path, &artifact)?;
    println!(
        "wrote {} ({} train / {} test trials, m = {})",
        path.display(),
        artifact.train_indices.len(),
        artifact.test_indices.len(),
        config.csp.m,
    );
    Ok(())
}

fn cmd_features(common: &Common) -> Result<(), AppError> {
    let config = effective_config(common)?;
    let epochs = load_stage_dataset(&common.out, "preprocess")?;
    let csp: CspArtifact = read_stage_json(&common.out.join(CSP_FILE), "csp-fit")?;
    check_seed(csp.seed, config.seed, CSP_FILE)?;

    let train_epochs = epochs.select(&csp.train_indices)?;
    let test_epochs = epochs.select(&csp.test_indices)?;
    let csp_train = csp_space_transform(&csp.model, &train_epochs)?;
    let csp_test = csp_space_transform(&csp.model, &test_epochs)?;
    let bands: Vec<(f64, f64)> = config.features.bands_hz.iter().map(|&[a, b]| (a, b)).collect();
    let welch = config.welch();
    let feats_train = assemble_2d(csp_train.epochs(), &bands, &welch)?;
    let feats_test = assemble_2d(csp_test.epochs(), &bands, &welch)?;
    let normalizer = fit_normalizer(&feats_train, config.features.normalizer)?;
    let train = apply_normalizer(&normalizer, &feats_train)?;
    let test = apply_normalizer(&normalizer, &feats_test)?;

    let shape = train.trial_matrix(0);
    let artifact = FeaturesArtifact {
        seed: config.seed,
        normalizer,
        train,
        test,
    };
    let path = common.out.join(FEATURES_FILE);
    write_json_atomic(&path, &artifact)?;
    println!(
        "wrote {} ({} train / {} test trials, {} x {} features per trial)",
        path.display(),
        artifact.train.n_trials(),
        artifact.test.n_trials(),
        shape.rows(),
        shape.cols(),
    );
    Ok(())
}

fn cmd_train(common: &Common) -> Result<(), AppError> {
    let config = effective_config(common)?;
    let feats: FeaturesArtifact = read_stage_json(&common.out.join(FEATURES_FILE), "features")?;
    check_seed(feats.seed, config.seed, FEATURES_FILE)?;

    let root = Rng::new(config.seed);
    let (spec, params, log) = train_agent(&config, feats.train, &root, "")?;
    for (i, interval) in log.intervals.iter().enumerate() {
        println!(
            "interval {i}: {} steps, mean reward {:.4}, mean loss {:.4}, {} refused",
            interval.steps, interval.mean_reward, interval.mean_loss, interval.refused_steps,
        );
    }
    let artifact = CheckpointArtifact {
        seed: config.seed,
        spec,
        params,
        log,
    };
    let path = common.out.join(CHECKPOINT_FILE);
    write_json_atomic(&path, &artifact)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_eval(common: &Common) -> Result<(), AppError> {
    let config = effective_config(common)?;
    let feats: FeaturesArtifact = read_stage_json(&common.out.join(FEATURES_FILE), "features")?;
    let ckpt: CheckpointArtifact = read_stage_json(&common.out.join(CHECKPOINT_FILE), "train")?;
    check_seed(feats.seed, config.seed, FEATURES_FILE)?;
    check_seed(ckpt.seed, config.seed, CHECKPOINT_FILE)?;

    let root = Rng::new(config.seed);
    let (metrics, reward_based_accuracy) =
        score_agent(&config, feats.test, &ckpt.spec, &ckpt.params, &root, "")?;
    println!(
        "accuracy {:.4}, macro F1 {:.4}, reward-based accuracy {:.4}",
        metrics.accuracy, metrics.macro_f1, reward_based_accuracy,
    );
    let artifact = EvalArtifact {
        seed: config.seed,
        metrics,
        reward_based_accuracy,
    };
    let path = common.out.join(EVAL_FILE);
    write_json_atomic(&path, &artifact)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_crossval(common: &Common) -> Result<(), AppError> {
    let config = effective_config(common)?;
    if config.eval.folds < 2 {
        return Err(AppError::Config(format!(
            "crossval needs eval.folds >= 2 (configured: {})",
            config.eval.folds,
        )));
    }
    let report = run_pipeline(&config, Some(&common.out))?;
    for fold in &report.folds {
        println!(
            "fold {}: accuracy {:.4}, reward-based accuracy {:.4}",
            fold.fold, fold.accuracy, fold.reward_based_accuracy,
        );
    }
    if let (Some(mean), Some(std)) = (&report.fold_mean, &report.fold_std) {
        println!(
            "{} folds: accuracy {:.4} +- {:.4}, reward-based accuracy {:.4} +- {:.4}",
            report.folds.len(),
            mean.accuracy,
            std.accuracy,
            mean.reward_based_accuracy,
            std.reward_based_accuracy,
        );
    }
    println!(
        "wrote {} and {}",
        common.out.join("report.json").display(),
        common.out.join("folds.csv").display(),
    );
    Ok(())
}

fn cmd_report(common: &Common) -> Result<(), AppError> {
    let config = effective_config(common)?;
    let report = run_pipeline(&config, Some(&common.out))?;
    println!(
        "accuracy {:.4}, macro F1 {:.4}, reward-based accuracy {:.4} ({:.1} s)",
        report.accuracy, report.macro_f1, report.reward_based_accuracy, report.runtime_s,
    );
    println!(
        "wrote {} and {}",
        common.out.join("report.json").display(),
        common.out.join("folds.csv").display(),
    );
    Ok(())
}

/// Reads the preprocessed epochs a downstream verb chains from.
fn load_stage_dataset(out: &Path, producer: &str) -> Result<EpochSet, AppError> {
    let path = out.join(PREPROCESSED_FILE);
    if !path.exists() {
        return Err(AppError::Config(format!(
            "missing {}; run `bciq {producer}` first",
            path.display(),
        )));
    }
    load_dataset(&path)
}

fn read_stage_json<T: for<'de> Deserialize<'de>>(
    path: &Path,
    producer: &str,
) -> Result<T, AppError> {
    let text = fs::read_to_string(path).map_err(|e| {
        AppError::Config(format!(
            "cannot read {}: {e}; run `bciq {producer}` first",
            path.display(),
        ))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::Format(format!("{}: {e}", path.display())))
}

/// Stage artifacts record the seed they were produced under; chaining them
/// with a different seed would silently mix unrelated runs.
fn check_seed(artifact_seed: u64, config_seed: u64, file: &str) -> Result<(), AppError> {
    if artifact_seed != config_seed {
        return Err(AppError::Config(format!(
            "{file} was produced with seed {artifact_seed} but the current seed is {config_seed}; \
             regenerate the stage artifacts or pass --seed {artifact_seed}",
        )));
    }
    Ok(())
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| AppError::Format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    let tmp = tmp_sibling(path);
    fs::write(&tmp, &text)?;
    rename_or_cleanup(&tmp, path)
}

fn save_dataset_atomic(path: &Path, epochs: &EpochSet) -> Result<(), AppError> {
    let tmp = tmp_sibling(path);
    save_dataset(&tmp, epochs)?;
    rename_or_cleanup(&tmp, path)
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn rename_or_cleanup(tmp: &Path, path: &Path) -> Result<(), AppError> {
    if let Err(e) = fs::rename(tmp, path) {
        let _ = fs::remove_file(tmp);
        return Err(e.into());
    }
    Ok(())
}
