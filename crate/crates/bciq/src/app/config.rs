//! Run configuration: one TOML document with a section per pipeline stage.
//! Unknown keys are rejected (the parse error names the key and line), and
//! `validate` checks every value range up front so a run cannot fail halfway
//! through on a bad setting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::dsp::{Averaging, Detrend, Scaling, WelchConfig, WindowKind};
use crate::features::NormalizerKind;
use crate::qnet::{AdamConfig, QNetworkSpec};
use crate::rl::{DqnHyper, EpsilonSchedule, RewardStructure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetSection,
    pub preprocessing: PreprocessingSection,
    pub csp: CspSection,
    pub features: FeaturesSection,
    pub qnet: QnetSection,
    pub rl: RlSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Dataset container file to load; when absent the synthetic generator
    /// below provides the data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub synthetic: SyntheticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub n_classes: usize,
    pub trials_per_class: usize,
    pub channels: usize,
    pub samples: usize,
    pub sample_rate_hz: f64,
}

impl Default for SyntheticSection {
    fn default() -> SyntheticSection {
        SyntheticSection {
            n_classes: 3,
            trials_per_class: 40,
            channels: 8,
            samples: 500,
            sample_rate_hz: 250.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessingSection {
    pub band_hz: [f64; 2],
    pub filter_order: usize,
    /// Optional crop applied after filtering, seconds relative to trial start.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch_s: Option<[f64; 2]>,
}

impl Default for PreprocessingSection {
    fn default() -> PreprocessingSection {
        PreprocessingSection {
            band_hz: [0.1, 50.0],
            filter_order: 4,
            epoch_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CspSection {
    pub m: usize,
    pub shrinkage: f64,
}

impl Default for CspSection {
    fn default() -> CspSection {
        CspSection {
            m: 3,
            shrinkage: crate::csp::COV_SHRINKAGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    pub bands_hz: Vec<[f64; 2]>,
    pub nfft: usize,
    pub overlap: f64,
    pub window: WindowKind,
    pub averaging: Averaging,
    pub scaling: Scaling,
    pub detrend: Detrend,
    pub normalizer: NormalizerKind,
}

impl Default for FeaturesSection {
    fn default() -> FeaturesSection {
        FeaturesSection {
            bands_hz: vec![[8.0, 13.0], [13.0, 30.0]],
            nfft: 128,
            overlap: 0.5,
            window: WindowKind::Hann,
            averaging: Averaging::Median,
            scaling: Scaling::Density,
            detrend: Detrend::Constant,
            normalizer: NormalizerKind::ZscoreTwofold,
        }
    }
}

/// Optional overrides of the standard Q-network architecture. Input shape
/// and action count always come from the data, never from the config.
/// Defaults weaken l1/l2 to 1e-4; the architecture's native 0.01 is sized
/// for far larger inputs than this pipeline's feature grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QnetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conv1_filters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conv1_kernel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conv2_filters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conv2_kernel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pool: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_pool: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lstm_units: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_sizes: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
}

impl Default for QnetSection {
    fn default() -> QnetSection {
        QnetSection {
            conv1_filters: None,
            conv1_kernel: None,
            conv2_filters: None,
            conv2_kernel: None,
            max_pool: None,
            avg_pool: None,
            dropout_rate: None,
            lstm_units: None,
            dense_sizes: None,
            l1: Some(1e-4),
            l2: Some(1e-4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    /// (r_correct, r_incorrect).
    pub reward: [f64; 2],
    pub gamma: f64,
    pub intervals: Vec<usize>,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub target_sync_every: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Exploration decay time constant in steps; defaults to a fifth of the
    /// first interval so epsilon is nearly spent when exploration ends.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub learning_rate: f64,
    pub decay: f64,
    pub huber_delta: f64,
}

impl Default for RlSection {
    fn default() -> RlSection {
        RlSection {
            reward: [1.0, 0.0],
            gamma: 0.5,
            intervals: vec![3000, 400, 400],
            replay_capacity: 10_000,
            batch_size: 32,
            warmup_steps: 100,
            target_sync_every: 200,
            eps_start: 1.0,
            eps_end: 0.0,
            tau: None,
            learning_rate: 0.0055,
            decay: 1e-4,
            huber_delta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub test_fraction: f64,
    /// 0 disables cross-validation; otherwise the number of stratified folds.
    pub folds: usize,
    pub episodes: usize,
}

impl Default for EvalSection {
    fn default() -> EvalSection {
        EvalSection {
            test_fraction: 0.2,
            folds: 0,
            episodes: 10,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, AppError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, AppError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        RunConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, AppError> {
        toml::to_string_pretty(self).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let fail = |field: &str, why: String| Err(AppError::Config(format!("{field}: {why}")));

        let s = &self.dataset.synthetic;
        if self.dataset.path.is_none() {
            if s.n_classes < 2 {
                return fail("dataset.synthetic.n_classes", format!("need >= 2, got {}", s.n_classes));
            }
            if s.trials_per_class < 2 {
                return fail(
                    "dataset.synthetic.trials_per_class",
                    format!("need >= 2, got {}", s.trials_per_class),
                );
            }
            if s.channels < 2 {
                return fail("dataset.synthetic.channels", format!("need >= 2, got {}", s.channels));
            }
            if s.samples == 0 {
                return fail("dataset.synthetic.samples", "must be positive".into());
            }
            if !(s.sample_rate_hz.is_finite() && s.sample_rate_hz > 0.0) {
                return fail(
                    "dataset.synthetic.sample_rate_hz",
                    format!("must be finite and positive, got {}", s.sample_rate_hz),
                );
            }
        }

        let [lo, hi] = self.preprocessing.band_hz;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return fail("preprocessing.band_hz", format!("need 0 < low < high, got [{lo}, {hi}]"));
        }
        if self.preprocessing.filter_order == 0 {
            return fail("preprocessing.filter_order", "must be positive".into());
        }
        if let Some([t0, t1]) = self.preprocessing.epoch_s {
            if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
                return fail("preprocessing.epoch_s", format!("need tmin < tmax, got [{t0}, {t1}]"));
            }
        }

        if self.csp.m == 0 {
            return fail("csp.m", "must be positive".into());
        }
        if !(0.0..1.0).contains(&self.csp.shrinkage) {
            return fail("csp.shrinkage", format!("must lie in [0, 1), got {}", self.csp.shrinkage));
        }

        if self.features.bands_hz.is_empty() {
            return fail("features.bands_hz", "need at least one band".into());
        }
        for &[blo, bhi] in &self.features.bands_hz {
            if !(blo.is_finite() && bhi.is_finite() && 0.0 <= blo && blo < bhi) {
                return fail("features.bands_hz", format!("need 0 <= low < high, got [{blo}, {bhi}]"));
            }
        }
        if self.features.nfft < 2 {
            return fail("features.nfft", format!("need >= 2, got {}", self.features.nfft));
        }
        if !(0.0..1.0).contains(&self.features.overlap) {
            return fail("features.overlap", format!("must lie in [0, 1), got {}", self.features.overlap));
        }

        let [rc, ri] = self.rl.reward;
        if let Err(e) = RewardStructure::new(rc, ri) {
            return fail("rl.reward", e.to_string());
        }
        if !(0.0..=1.0).contains(&self.rl.gamma) {
            return fail("rl.gamma", format!("must lie in [0, 1], got {}", self.rl.gamma));
        }
        if self.rl.intervals.is_empty() {
            return fail("rl.intervals", "need at least one interval".into());
        }
        if self.rl.intervals.iter().any(|&n| n == 0) {
            return fail("rl.intervals", "every interval must have at least one step".into());
        }
        if self.rl.replay_capacity == 0 {
            return fail("rl.replay_capacity", "must be positive".into());
        }
        if self.rl.batch_size == 0 {
            return fail("rl.batch_size", "must be positive".into());
        }
        if self.rl.target_sync_every == 0 {
            return fail("rl.target_sync_every", "must be positive".into());
        }
        if let Err(e) = EpsilonSchedule::new(self.rl.eps_start, self.rl.eps_end, self.tau()) {
            let field = if self.rl.tau.is_some() { "rl.eps_start/eps_end/tau" } else { "rl.eps_start/eps_end" };
            return fail(field, e.to_string());
        }
        if !(self.rl.learning_rate.is_finite() && self.rl.learning_rate > 0.0) {
            return fail("rl.learning_rate", format!("must be positive, got {}", self.rl.learning_rate));
        }
        if !(self.rl.decay.is_finite() && self.rl.decay >= 0.0) {
            return fail("rl.decay", format!("must be non-negative, got {}", self.rl.decay));
        }
        if !(self.rl.huber_delta.is_finite() && self.rl.huber_delta > 0.0) {
            return fail("rl.huber_delta", format!("must be positive, got {}", self.rl.huber_delta));
        }

        if !(self.eval.test_fraction > 0.0 && self.eval.test_fraction < 1.0) {
            return fail("eval.test_fraction", format!("must lie in (0, 1), got {}", self.eval.test_fraction));
        }
        if self.eval.folds == 1 {
            return fail("eval.folds", "must be 0 (disabled) or >= 2".into());
        }
        if self.eval.episodes == 0 {
            return fail("eval.episodes", "must be positive".into());
        }
        Ok(())
    }

    pub fn welch(&self) -> WelchConfig {
        WelchConfig {
            nfft: self.features.nfft,
            overlap: self.features.overlap,
            window: self.features.window,
            averaging: self.features.averaging,
            scaling: self.features.scaling,
            detrend: self.features.detrend,
        }
    }

    pub fn tau(&self) -> f64 {
        self.rl
            .tau
            .unwrap_or_else(|| self.rl.intervals.first().copied().unwrap_or(1).max(1) as f64 / 5.0)
    }

    pub fn reward(&self) -> Result<RewardStructure, AppError> {
        RewardStructure::new(self.rl.reward[0], self.rl.reward[1])
            .map_err(|e| AppError::Config(format!("rl.reward: {e}")))
    }

    pub fn schedule(&self) -> Result<EpsilonSchedule, AppError> {
        EpsilonSchedule::new(self.rl.eps_start, self.rl.eps_end, self.tau())
            .map_err(|e| AppError::Config(format!("rl epsilon schedule: {e}")))
    }

    pub fn hyper(&self) -> DqnHyper {
        DqnHyper {
            replay_capacity: self.rl.replay_capacity,
            batch_size: self.rl.batch_size,
            warmup_steps: self.rl.warmup_steps,
            target_sync_every: self.rl.target_sync_every,
            gamma: self.rl.gamma,
            huber_delta: self.rl.huber_delta,
            adam: AdamConfig::new(self.rl.learning_rate, self.rl.decay),
        }
    }

    /// The standard architecture for the given data shape, with any
    /// `[qnet]` overrides applied.
    pub fn qnet_spec(&self, channels_in: usize, time_in: usize, n_actions: usize) -> QNetworkSpec {
        let mut spec = QNetworkSpec::standard(channels_in, time_in, n_actions);
        let q = &self.qnet;
        if let Some(v) = q.conv1_filters {
            spec.conv1_filters = v;
        }
        if let Some(v) = q.conv1_kernel {
            spec.conv1_kernel = v;
        }
        if let Some(v) = q.conv2_filters {
            spec.conv2_filters = v;
        }
        if let Some(v) = q.conv2_kernel {
            spec.conv2_kernel = v;
        }
        if let Some(v) = q.max_pool {
            spec.max_pool = v;
        }
        if let Some(v) = q.avg_pool {
            spec.avg_pool = v;
        }
        if let Some(v) = q.dropout_rate {
            spec.dropout_rate = v;
        }
        if let Some(v) = q.lstm_units {
            spec.lstm_units = v;
        }
        if let Some(v) = q.dense_sizes {
            spec.dense_sizes = v;
        }
        if let Some(v) = q.l1 {
            spec.l1 = v;
        }
        if let Some(v) = q.l2 {
            spec.l2 = v;
        }
        spec
    }
}

/// The default configuration rendered as TOML, suitable as a starting point
/// for experiment files.
pub fn default_config_toml() -> String {
    RunConfig::default()
        .to_toml_string()
        .expect("default config serializes")
}
