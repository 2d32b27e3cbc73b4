//! One-versus-rest CSP: per-class spatial filter banks, the time-preserving
//! component projection, classic log-variance features, and a linear
//! baseline classifier for separability checks.

mod baseline;

pub use baseline::{fit_linear_baseline, predict_baseline, LinearBaseline};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{DspError, EpochSet};
use crate::features::{FeatureError, FeatureLayout, FeatureTensor};
use crate::mathcore::{covariance, generalized_eigh, MathError, Matrix, SpdMatrix};

/// Shrinkage applied to the class and composite covariance means before the
/// generalized eigensolve: large enough to lift an exactly singular composite
/// past the whitening guard, small enough that filter normalization against
/// the unshrunk composite still holds to about 1e-6.
pub const COV_SHRINKAGE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CspError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("constant signal: {0}")]
    ConstantSignal(String),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// One-versus-rest CSP model: one filter bank per class.
///
/// Bank `i` holds the top `m` generalized eigenvectors of
/// `(Sigma_class_i, Sigma_class_i + Sigma_rest_i)` as rows, eigenvalues
/// descending in [0, 1]. Rows are normalized so `w' * composite * w = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspOvrModel {
    n_classes: usize,
    m: usize,
    n_channels: usize,
    filters: Vec<Matrix>,
    eigenvalues: Vec<Vec<f64>>,
    trace_normalized: bool,
    shrinkage: f64,
}

impl CspOvrModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Components per class.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// Filter bank of one class, `m x channels`, rows are filters.
    pub fn filters(&self, class: usize) -> &Matrix {
        &self.filters[class]
    }

    /// Top-m eigenvalues of one class, descending.
    pub fn eigenvalues(&self, class: usize) -> &[f64] {
        &self.eigenvalues[class]
    }

    pub fn trace_normalized(&self) -> bool {
        self.trace_normalized
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// All banks stacked class-major, rank-minor: `(n_classes * m) x channels`.
    pub fn stacked_filters(&self) -> Matrix {
        let mut w = Matrix::zeros(self.n_classes * self.m, self.n_channels);
        for (class, bank) in self.filters.iter().enumerate() {
            for rank in 0..self.m {
                w.row_mut(class * self.m + rank)
                    .copy_from_slice(bank.row(rank));
            }
        }
        w
    }
}

/// Component-space trials: `(n_classes * m)` spatially filtered time series
/// per trial, with the source (class, rank) of every component row.
#[derive(Debug, Clone, PartialEq)]
pub struct CspSpaceEpochs {
    epochs: EpochSet,
    provenance: Vec<(usize, usize)>,
}

impl CspSpaceEpochs {
    /// The component signals as an epoch set (components in channel position).
    pub fn epochs(&self) -> &EpochSet {
        &self.epochs
    }

    /// Per component row: (source class, rank within that class's bank).
    pub fn provenance(&self) -> &[(usize, usize)] {
        &self.provenance
    }

    pub fn component_names(&self) -> Vec<String> {
        self.provenance
            .iter()
            .map(|&(class, rank)| format!("csp{class}r{rank}"))
            .collect()
    }
}

/// Mean of trace-normalized trial covariances over `indices`.
fn mean_covariance(
    epochs: &EpochSet,
    covs: &[SpdMatrix],
    indices: &[usize],
) -> Result<SpdMatrix, CspError> {
    let mut acc = SpdMatrix::from_matrix(&Matrix::zeros(
        epochs.n_channels(),
        epochs.n_channels(),
    ))?;
    for &i in indices {
        acc = acc.add(&covs[i])?;
    }
    Ok(acc.scale(1.0 / indices.len() as f64))
}

/// Fit one CSP filter bank per class against the pooled rest.
///
/// Per class: the mean trace-normalized covariance of that class's trials is
/// solved against the composite (class + rest) covariance, and the top `m`
/// eigenvectors by descending eigenvalue become the bank. Solving against
/// the composite instead of the rest alone keeps the same filter ordering
/// while bounding eigenvalues to [0, 1].
pub fn fit_csp_ovr(epochs: &EpochSet, m: usize) -> Result<CspOvrModel, CspError> {
    fit_csp_ovr_with(epochs, m, COV_SHRINKAGE)
}

/// [`fit_csp_ovr`] with an explicit covariance shrinkage instead of
/// [`COV_SHRINKAGE`].
pub fn fit_csp_ovr_with(
    epochs: &EpochSet,
    m: usize,
    shrinkage: f64,
) -> Result<CspOvrModel, CspError> {
    let n_classes = epochs.n_classes();
    let channels = epochs.n_channels();
    if !(0.0..1.0).contains(&shrinkage) {
        return Err(CspError::InvalidParameter(format!(
            "shrinkage must lie in [0, 1), got {shrinkage}"
        )));
    }
    if m == 0 || m > channels {
        return Err(CspError::InvalidParameter(format!(
            "m must lie in 1..={channels}, got {m}"
        )));
    }
    if n_classes < 2 {
        return Err(CspError::InsufficientData(
            "one-versus-rest needs at least 2 classes".into(),
        ));
    }
    let mut class_indices: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (t, &l) in epochs.labels().iter().enumerate() {
        class_indices[l].push(t);
    }
    if let Some((class, idx)) = class_indices
        .iter()
        .enumerate()
        .find(|(_, idx)| idx.len() < 2)
    {
        return Err(CspError::InsufficientData(format!(
            "class {class} has {} trial(s), need at least 2",
            idx.len()
        )));
    }

    let covs: Vec<SpdMatrix> = epochs
        .trials()
        .iter()
        .map(|trial| covariance(trial, true))
        .collect::<Result<_, _>>()?;

    let mut filters = Vec::with_capacity(n_classes);
    let mut eigenvalues = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let rest: Vec<usize> = (0..epochs.n_trials())
            .filter(|t| epochs.labels()[*t] != class)
            .collect();
        let sigma_class = mean_covariance(epochs, &covs, &class_indices[class])?
            .shrink(shrinkage);
        let sigma_rest = mean_covariance(epochs, &covs, &rest)?.shrink(shrinkage);
        let composite = sigma_class.add(&sigma_rest)?;

        let decomp = generalized_eigh(&sigma_class, &composite)?;
        let mut evs = Vec::with_capacity(m);
        for &ev in decomp.eigenvalues.iter().take(m) {
            if !(-1e-9..=1.0 + 1e-9).contains(&ev) {
                return Err(CspError::InvalidParameter(format!(
                    "class {class}: eigenvalue {ev} outside [0, 1]"
                )));
            }
            evs.push(ev.clamp(0.0, 1.0));
        }
        let mut bank = Matrix::zeros(m, channels);
        for rank in 0..m {
            bank.row_mut(rank)
                .copy_from_slice(&decomp.eigenvector(rank));
        }
        filters.push(bank);
        eigenvalues.push(evs);
    }

    Ok(CspOvrModel {
        n_classes,
        m,
        n_channels: channels,
        filters,
        eigenvalues,
        trace_normalized: true,
        shrinkage,
    })
}

/// Project trials into component space, keeping the full time axis:
/// `out[c, t] = sum_ch W[c, ch] * x[ch, t]`.
pub fn csp_space_transform(
    model: &CspOvrModel,
    epochs: &EpochSet,
) -> Result<CspSpaceEpochs, CspError> {
    if epochs.n_channels() != model.n_channels {
        return Err(CspError::InvalidParameter(format!(
            "model fitted on {} channels, epochs have {}",
            model.n_channels,
            epochs.n_channels()
        )));
    }
    let w = model.stacked_filters();
    let trials: Vec<Matrix> = epochs
        .trials()
        .iter()
        .map(|x| w.matmul(x))
        .collect::<Result<_, _>>()?;
    let projected = EpochSet::new(
        trials,
        epochs.labels().to_vec(),
        epochs.n_classes(),
        epochs.sample_rate_hz(),
        epochs.window_s(),
    )?;
    let provenance: Vec<(usize, usize)> = (0..model.n_classes)
        .flat_map(|class| (0..model.m).map(move |rank| (class, rank)))
        .collect();
    Ok(CspSpaceEpochs {
        epochs: projected,
        provenance,
    })
}

/// Classic CSP features: per component, log of its share of total variance.
pub fn csp_logvar_features(csp_epochs: &CspSpaceEpochs) -> Result<FeatureTensor, CspError> {
    let epochs = &csp_epochs.epochs;
    let names: Vec<String> = csp_epochs
        .component_names()
        .into_iter()
        .map(|n| format!("{n}.logvar"))
        .collect();
    let mut data = Vec::with_capacity(epochs.n_trials());
    for t in 0..epochs.n_trials() {
        let trial = epochs.trial(t);
        let vars: Vec<f64> = (0..trial.rows())
            .map(|c| {
                let row = trial.row(c);
                let mean = row.iter().sum::<f64>() / row.len() as f64;
                row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64
            })
            .collect();
        let total: f64 = vars.iter().sum();
        if total <= 0.0 {
            return Err(CspError::ConstantSignal(format!(
                "trial {t} has zero total component variance"
            )));
        }
        if let Some(c) = vars.iter().position(|&v| v <= 0.0) {
            return Err(CspError::ConstantSignal(format!(
                "trial {t}, component {c} has zero variance"
            )));
        }
        data.push(vars.iter().map(|v| (v / total).ln()).collect());
    }
    Ok(FeatureTensor::new(
        FeatureLayout::Flat1d,
        data,
        epochs.labels().to_vec(),
        epochs.n_classes(),
        names,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Rng;

    /// Epochs where channel variance depends on (class, channel) through
    /// `scale`, everything else independent noise.
    fn scaled_noise_epochs(
        rng: &mut Rng,
        n_classes: usize,
        trials_per_class: usize,
        channels: usize,
        samples: usize,
        scale: impl Fn(usize, usize) -> f64,
    ) -> EpochSet {
        let mut trials = Vec::new();
        let mut labels = Vec::new();
        for class in 0..n_classes {
            for _ in 0..trials_per_class {
                let data: Vec<f64> = (0..channels)
                    .flat_map(|ch| {
                        let s = scale(class, ch);
                        (0..samples).map(|_| s * rng.normal()).collect::<Vec<_>>()
                    })
                    .collect();
                trials.push(Matrix::new(channels, samples, data).unwrap());
                labels.push(class);
            }
        }
        EpochSet::new(
            trials,
            labels,
            n_classes,
            250.0,
            (0.0, samples as f64 / 250.0),
        )
        .unwrap()
    }

    #[test]
    fn identical_covariances_give_half_eigenvalues() {
        // The same trials under both labels make class and rest means equal,
        // so every whitened eigenvalue is exactly 1/2.
        let mut rng = Rng::new(40);
        let base: Vec<Matrix> = (0..5)
            .map(|_| {
                Matrix::new(4, 200, (0..800).map(|_| rng.normal()).collect()).unwrap()
            })
            .collect();
        let mut trials = base.clone();
        trials.extend(base);
        let labels: Vec<usize> = std::iter::repeat(0)
            .take(5)
            .chain(std::iter::repeat(1).take(5))
            .collect();
        let epochs = EpochSet::new(trials, labels, 2, 250.0, (0.0, 0.8)).unwrap();
        let model = fit_csp_ovr(&epochs, 4).unwrap();
        for class in 0..2 {
            for &ev in model.eigenvalues(class) {
                assert!((ev - 0.5).abs() < 1e-6, "eigenvalue {ev}");
            }
        }
    }

    #[test]
    fn strong_channel_is_recovered_by_top_filter() {
        // Class 0 carries 10x the variance on channel 0; its top filter
        // should align with e0.
        let mut rng = Rng::new(41);
        let epochs = scaled_noise_epochs(&mut rng, 3, 20, 8, 300, |class, ch| {
            if class == 0 && ch == 0 {
                (10.0f64).sqrt()
            } else {
                1.0
            }
        });
        let model = fit_csp_ovr(&epochs, 3).unwrap();
        let w = model.filters(0).row(0);
        let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = (w[0] / norm).abs();
        assert!(cos > 0.9, "cosine to e0: {cos}");
    }

    #[test]
    fn top_eigenvalue_beats_random_rayleigh_quotients() {
        let mut rng = Rng::new(42);
        let epochs = scaled_noise_epochs(&mut rng, 2, 15, 6, 250, |class, ch| {
            1.0 + 0.5 * ((class + ch) % 3) as f64
        });
        let model = fit_csp_ovr(&epochs, 1).unwrap();

        // Rebuild the per-class matrices independently and probe.
        let covs: Vec<SpdMatrix> = epochs
            .trials()
            .iter()
            .map(|t| covariance(t, true).unwrap())
            .collect();
        for class in 0..2 {
            let cls: Vec<usize> = (0..epochs.n_trials())
                .filter(|&t| epochs.labels()[t] == class)
                .collect();
            let rest: Vec<usize> = (0..epochs.n_trials())
                .filter(|&t| epochs.labels()[t] != class)
                .collect();
            let a = mean_covariance(&epochs, &covs, &cls)
                .unwrap()
                .shrink(COV_SHRINKAGE);
            let b = mean_covariance(&epochs, &covs, &rest)
                .unwrap()
                .shrink(COV_SHRINKAGE);
            let composite = a.add(&b).unwrap();
            let top = model.eigenvalues(class)[0];
            for _ in 0..1000 {
                let v: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
                let rq = a.quadratic_form(&v) / composite.quadratic_form(&v);
                assert!(top >= rq - 1e-9, "class {class}: {top} < {rq}");
            }
        }
    }

    #[test]
    fn filters_satisfy_composite_normalization_and_residual() {
        let mut rng = Rng::new(43);
        let epochs = scaled_noise_epochs(&mut rng, 3, 12, 5, 220, |class, ch| {
            1.0 + 0.3 * class as f64 + 0.1 * ch as f64
        });
        let model = fit_csp_ovr(&epochs, 5).unwrap();

        let covs: Vec<SpdMatrix> = epochs
            .trials()
            .iter()
            .map(|t| covariance(t, true).unwrap())
            .collect();
        for class in 0..3 {
            let cls: Vec<usize> = (0..epochs.n_trials())
                .filter(|&t| epochs.labels()[t] == class)
                .collect();
            let rest: Vec<usize> = (0..epochs.n_trials())
                .filter(|&t| epochs.labels()[t] != class)
                .collect();
            let a = mean_covariance(&epochs, &covs, &cls)
                .unwrap()
                .shrink(model.shrinkage());
            let b = mean_covariance(&epochs, &covs, &rest)
                .unwrap()
                .shrink(model.shrinkage());
            let composite = a.add(&b).unwrap();
            let am = a.as_matrix();
            let cm = composite.as_matrix();
            let evs = model.eigenvalues(class);

            // Non-increasing eigenvalues.
            for pair in evs.windows(2) {
                assert!(pair[0] >= pair[1] - 1e-12);
            }
            for rank in 0..model.m() {
                let w = model.filters(class).row(rank);
                // w' * composite * w = 1.
                let norm = composite.quadratic_form(w);
                assert!((norm - 1.0).abs() < 1e-6, "normalization {norm}");
                // Generalized eigen-residual.
                let aw = am.matvec(w).unwrap();
                let cw = cm.matvec(w).unwrap();
                let res: f64 = aw
                    .iter()
                    .zip(&cw)
                    .map(|(x, y)| (x - evs[rank] * y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-7, "residual {res}");
            }
        }
    }

    #[test]
    fn fit_rejects_thin_classes_and_bad_m() {
        let mut rng = Rng::new(44);
        let epochs = scaled_noise_epochs(&mut rng, 2, 3, 4, 100, |_, _| 1.0);
        assert!(matches!(
            fit_csp_ovr(&epochs, 0),
            Err(CspError::InvalidParameter(_))
        ));
        assert!(matches!(
            fit_csp_ovr(&epochs, 5),
            Err(CspError::InvalidParameter(_))
        ));

        // One trial for class 1.
        let trials: Vec<Matrix> = (0..3)
            .map(|_| Matrix::new(2, 100, (0..200).map(|_| rng.normal()).collect()).unwrap())
            .collect();
        let thin = EpochSet::new(trials, vec![0, 0, 1], 2, 250.0, (0.0, 0.4)).unwrap();
        assert!(matches!(
            fit_csp_ovr(&thin, 1),
            Err(CspError::InsufficientData(_))
        ));
    }

    fn passthrough_model(n_classes: usize, m: usize, channels: usize) -> CspOvrModel {
        // Bank rows are unit axis vectors: component (c, r) reads channel
        // (c * m + r) % channels directly.
        let filters = (0..n_classes)
            .map(|c| {
                let mut bank = Matrix::zeros(m, channels);
                for r in 0..m {
                    bank.set(r, (c * m + r) % channels, 1.0);
                }
                bank
            })
            .collect();
        CspOvrModel {
            n_classes,
            m,
            n_channels: channels,
            filters,
            eigenvalues: vec![vec![0.5; m]; n_classes],
            trace_normalized: true,
            shrinkage: COV_SHRINKAGE,
        }
    }

    #[test]
    fn identity_filter_reads_out_the_channel() {
        let mut rng = Rng::new(45);
        let epochs = scaled_noise_epochs(&mut rng, 2, 2, 3, 50, |_, _| 1.0);
        let model = passthrough_model(2, 1, 3);
        let out = csp_space_transform(&model, &epochs).unwrap();
        assert_eq!(out.provenance(), &[(0, 0), (1, 0)]);
        for t in 0..epochs.n_trials() {
            for s in 0..50 {
                assert_eq!(out.epochs().trial(t).get(0, s), epochs.trial(t).get(0, s));
                assert_eq!(out.epochs().trial(t).get(1, s), epochs.trial(t).get(1, s));
            }
        }
    }

    #[test]
    fn transform_shape_follows_the_contract() {
        let mut rng = Rng::new(46);
        let channels = 8;
        let trials: Vec<Matrix> = (0..287)
            .map(|_| {
                Matrix::new(
                    channels,
                    1000,
                    (0..channels * 1000).map(|_| rng.normal()).collect(),
                )
                .unwrap()
            })
            .collect();
        let labels: Vec<usize> = (0..287).map(|t| t % 4).collect();
        let epochs = EpochSet::new(trials, labels, 4, 250.0, (0.0, 4.0)).unwrap();
        let model = passthrough_model(4, 3, channels);
        let out = csp_space_transform(&model, &epochs).unwrap();
        assert_eq!(out.epochs().n_trials(), 287);
        assert_eq!(out.epochs().n_channels(), 12);
        assert_eq!(out.epochs().n_samples(), 1000);
        assert_eq!(out.provenance().len(), 12);
        assert_eq!(out.provenance()[5], (1, 2));
    }

    #[test]
    fn transform_rejects_channel_mismatch() {
        let mut rng = Rng::new(47);
        let epochs = scaled_noise_epochs(&mut rng, 2, 2, 4, 50, |_, _| 1.0);
        let model = passthrough_model(2, 1, 3);
        assert!(matches!(
            csp_space_transform(&model, &epochs),
            Err(CspError::InvalidParameter(_))
        ));
    }

    #[test]
    fn transform_is_linear() {
        let mut rng = Rng::new(48);
        let model = {
            let fit_set = scaled_noise_epochs(&mut rng, 2, 10, 4, 200, |class, ch| {
                1.0 + 0.4 * ((class * 2 + ch) % 3) as f64
            });
            fit_csp_ovr(&fit_set, 2).unwrap()
        };
        let xs = scaled_noise_epochs(&mut rng, 2, 2, 4, 100, |_, _| 1.0);
        let ys = scaled_noise_epochs(&mut rng, 2, 2, 4, 100, |_, _| 1.5);
        let (a, b) = (2.5, -1.25);
        let combo_trials: Vec<Matrix> = xs
            .trials()
            .iter()
            .zip(ys.trials())
            .map(|(x, y)| {
                Matrix::new(
                    4,
                    100,
                    x.data()
                        .iter()
                        .zip(y.data())
                        .map(|(xv, yv)| a * xv + b * yv)
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let combo = EpochSet::new(
            combo_trials,
            xs.labels().to_vec(),
            2,
            250.0,
            xs.window_s(),
        )
        .unwrap();

        let tx = csp_space_transform(&model, &xs).unwrap();
        let ty = csp_space_transform(&model, &ys).unwrap();
        let tc = csp_space_transform(&model, &combo).unwrap();
        for t in 0..xs.n_trials() {
            for c in 0..4 {
                for s in 0..100 {
                    let want =
                        a * tx.epochs().trial(t).get(c, s) + b * ty.epochs().trial(t).get(c, s);
                    let got = tc.epochs().trial(t).get(c, s);
                    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn class_component_is_discriminative_on_synthetic_data() {
        let mut rng = Rng::new(49);
        let epochs = scaled_noise_epochs(&mut rng, 3, 25, 6, 300, |class, ch| {
            if ch == 2 * class {
                3.0
            } else {
                1.0
            }
        });
        let model = fit_csp_ovr(&epochs, 2).unwrap();
        let out = csp_space_transform(&model, &epochs).unwrap();

        // Variance of class 0's top component across trials.
        let comp_var = |t: usize| {
            let row = out.epochs().trial(t).row(0);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64
        };
        let (mut in_class, mut in_n) = (0.0, 0);
        let (mut rest, mut rest_n) = (0.0, 0);
        for t in 0..epochs.n_trials() {
            if epochs.labels()[t] == 0 {
                in_class += comp_var(t);
                in_n += 1;
            } else {
                rest += comp_var(t);
                rest_n += 1;
            }
        }
        assert!(in_class / in_n as f64 > rest / rest_n as f64);
    }

    #[test]
    fn logvar_features_match_direct_computation() {
        let mut rng = Rng::new(50);
        let epochs = scaled_noise_epochs(&mut rng, 2, 4, 4, 150, |_, ch| 1.0 + ch as f64);
        let model = fit_csp_ovr(&epochs, 2).unwrap();
        let out = csp_space_transform(&model, &epochs).unwrap();
        let feats = csp_logvar_features(&out).unwrap();
        assert_eq!(feats.n_features(), 4);
        assert_eq!(feats.labels(), epochs.labels());

        for t in 0..out.epochs().n_trials() {
            let trial = out.epochs().trial(t);
            let vars: Vec<f64> = (0..4)
                .map(|c| {
                    let row = trial.row(c);
                    let mean = row.iter().sum::<f64>() / row.len() as f64;
                    row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64
                })
                .collect();
            let total: f64 = vars.iter().sum();
            for c in 0..4 {
                let want = (vars[c] / total).ln();
                let got = feats.trial(t)[c];
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn logvar_edge_cases() {
        // Single component: its share of total variance is 1, log is 0.
        let mut rng = Rng::new(51);
        let data: Vec<f64> = (0..100).map(|_| rng.normal()).collect();
        let single = CspSpaceEpochs {
            epochs: EpochSet::new(
                vec![Matrix::new(1, 100, data.clone()).unwrap()],
                vec![0],
                1,
                250.0,
                (0.0, 0.4),
            )
            .unwrap(),
            provenance: vec![(0, 0)],
        };
        let feats = csp_logvar_features(&single).unwrap();
        assert!(feats.trial(0)[0].abs() < 1e-12);

        // Two identical components: both shares are 1/2.
        let mut both = data.clone();
        both.extend(&data);
        let pair = CspSpaceEpochs {
            epochs: EpochSet::new(
                vec![Matrix::new(2, 100, both).unwrap()],
                vec![0],
                1,
                250.0,
                (0.0, 0.4),
            )
            .unwrap(),
            provenance: vec![(0, 0), (0, 1)],
        };
        let feats = csp_logvar_features(&pair).unwrap();
        for c in 0..2 {
            assert!((feats.trial(0)[c] - 0.5f64.ln()).abs() < 1e-12);
        }

        // Constant components have no variance to take a log of.
        let flat = CspSpaceEpochs {
            epochs: EpochSet::new(
                vec![Matrix::new(1, 100, vec![2.0; 100]).unwrap()],
                vec![0],
                1,
                250.0,
                (0.0, 0.4),
            )
            .unwrap(),
            provenance: vec![(0, 0)],
        };
        assert!(matches!(
            csp_logvar_features(&flat),
            Err(CspError::ConstantSignal(_))
        ));
    }

    #[test]
    fn ovr_bank_count_matches_class_count() {
        let mut rng = Rng::new(52);
        for n_classes in [2usize, 3, 4] {
            let epochs =
                scaled_noise_epochs(&mut rng, n_classes, 8, 5, 200, |class, ch| {
                    1.0 + 0.2 * ((class + ch) % 2) as f64
                });
            let model = fit_csp_ovr(&epochs, 2).unwrap();
            assert_eq!(model.n_classes(), n_classes);
            for class in 0..n_classes {
                assert_eq!(model.filters(class).rows(), 2);
                assert_eq!(model.eigenvalues(class).len(), 2);
            }
        }
    }
}
