//! Synthetic motor-imagery-like dataset generator: desk-scale stand-in data
//! with a known, recoverable class structure.
//!
//! Every trial carries one sinusoidal rhythm per class, each living on its
//! own designated channel pair at a class-specific frequency between 8 and
//! 30 Hz. The trial's own class keeps full amplitude; the other rhythms are
//! attenuated. On top of that, every channel gets 1/f pink noise plus white
//! noise. The construction makes class k's band power on its designated
//! channels reliably higher for class-k trials, which is what the spatial
//! filtering stage is built to find.

use serde::{Deserialize, Serialize};

use crate::dsp::EpochSet;
use crate::mathcore::{Matrix, Rng};

use super::AppError;

const AMPLITUDE: f64 = 2.0;
const ATTENUATION: f64 = 0.3;
const PINK_SCALE: f64 = 0.25;
const WHITE_SCALE: f64 = 0.5;

/// Everything needed to reproduce or audit a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProvenance {
    pub n_classes: usize,
    pub trials_per_class: usize,
    pub channels: usize,
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub seed: u64,
    pub class_freqs_hz: Vec<f64>,
    pub class_pairs: Vec<(usize, usize)>,
    pub amplitude: f64,
    pub attenuation: f64,
    pub pink_scale: f64,
    pub white_scale: f64,
}

/// Class frequencies spread evenly over the open 8–30 Hz interval.
fn class_frequencies(n_classes: usize) -> Vec<f64> {
    (0..n_classes)
        .map(|k| 8.0 + 22.0 * (k as f64 + 0.5) / n_classes as f64)
        .collect()
}

fn class_pairs(n_classes: usize, channels: usize) -> Vec<(usize, usize)> {
    (0..n_classes)
        .map(|k| ((2 * k) % channels, (2 * k + 1) % channels))
        .collect()
}

/// Paul Kellet's pink-noise filter, one instance per channel.
struct PinkFilter {
    b: [f64; 7],
}

impl PinkFilter {
    fn new() -> Self {
        PinkFilter { b: [0.0; 7] }
    }

    fn next(&mut self, white: f64) -> f64 {
        let b = &mut self.b;
        b[0] = 0.99886 * b[0] + white * 0.0555179;
        b[1] = 0.99332 * b[1] + white * 0.0750759;
        b[2] = 0.96900 * b[2] + white * 0.1538520;
        b[3] = 0.86650 * b[3] + white * 0.3104856;
        b[4] = 0.55000 * b[4] + white * 0.5329522;
        b[5] = -0.7616 * b[5] - white * 0.0168980;
        let pink = b.iter().sum::<f64>() + white * 0.5362;
        b[6] = white * 0.115926;
        pink
    }
}

/// Generate `n_classes * trials_per_class` labeled trials. The same seed
/// always produces the same dataset.
pub fn generate_synthetic(
    n_classes: usize,
    trials_per_class: usize,
    channels: usize,
    samples: usize,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<(EpochSet, SynthProvenance), AppError> {
    if n_classes == 0 || trials_per_class == 0 || channels == 0 || samples == 0 {
        return Err(AppError::InvalidParameter(format!(
            "all counts must be positive: {n_classes} classes, {trials_per_class} trials/class, \
             {channels} channels, {samples} samples"
        )));
    }
    if channels < 2 {
        return Err(AppError::InvalidParameter(
            "need at least 2 channels for a designated pair".into(),
        ));
    }
    let freqs = class_frequencies(n_classes);
    let f_max = freqs.last().copied().unwrap();
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 2.0 * f_max) {
        return Err(AppError::InvalidParameter(format!(
            "sample rate {sample_rate_hz} Hz must exceed twice the top class frequency {f_max} Hz"
        )));
    }

    let pairs = class_pairs(n_classes, channels);
    let mut rng = Rng::new(seed).stream("synth");
    let n_trials = n_classes * trials_per_class;
    let dt = 1.0 / sample_rate_hz;

    let mut trials = Vec::with_capacity(n_trials);
    let mut labels = Vec::with_capacity(n_trials);
    for t in 0..n_trials {
        let class = t % n_classes;
        let phases: Vec<f64> = (0..n_classes)
            .map(|_| rng.uniform() * std::f64::consts::TAU)
            .collect();

        let mut m = Matrix::zeros(channels, samples);
        for ch in 0..channels {
            let mut pink = PinkFilter::new();
            let row = m.row_mut(ch);
            for v in row.iter_mut() {
                *v = PINK_SCALE * pink.next(rng.normal()) + WHITE_SCALE * rng.normal();
            }
        }
        for k in 0..n_classes {
            let amp = if k == class {
                AMPLITUDE
            } else {
                AMPLITUDE * ATTENUATION
            };
            let (a, b) = pairs[k];
            let omega = std::f64::consts::TAU * freqs[k];
            for s in 0..samples {
                let wave = amp * (omega * s as f64 * dt + phases[k]).sin();
                m.set(a, s, m.get(a, s) + wave);
                if b != a {
                    m.set(b, s, m.get(b, s) + wave);
                }
            }
        }
        trials.push(m);
        labels.push(class);
    }

    let epochs = EpochSet::new(
        trials,
        labels,
        n_classes,
        sample_rate_hz,
        (0.0, samples as f64 / sample_rate_hz),
    )?;
    let provenance = SynthProvenance {
        n_classes,
        trials_per_class,
        channels,
        samples,
        sample_rate_hz,
        seed,
        class_freqs_hz: freqs,
        class_pairs: pairs,
        amplitude: AMPLITUDE,
        attenuation: ATTENUATION,
        pink_scale: PINK_SCALE,
        white_scale: WHITE_SCALE,
    };
    Ok((epochs, provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::split::stratified_split;
    use crate::csp::{csp_logvar_features, csp_space_transform, fit_csp_ovr};
    use crate::csp::{fit_linear_baseline, predict_baseline};

    #[test]
    fn same_seed_gives_identical_datasets() {
        let (a, prov_a) = generate_synthetic(3, 4, 8, 250, 250.0, 99).unwrap();
        let (b, prov_b) = generate_synthetic(3, 4, 8, 250, 250.0, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(prov_a, prov_b);
        let (c, _) = generate_synthetic(3, 4, 8, 250, 250.0, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn frequencies_stay_inside_the_band_and_pairs_are_disjoint_when_room() {
        let prov = generate_synthetic(4, 1, 8, 100, 250.0, 1).unwrap().1;
        for f in &prov.class_freqs_hz {
            assert!((8.0..30.0).contains(f), "{f} outside 8-30");
        }
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &prov.class_pairs {
            assert!(seen.insert(a) && seen.insert(b), "pairs overlap: {:?}", prov.class_pairs);
        }
    }

    #[test]
    fn designated_channel_band_power_separates_the_classes() {
        let (epochs, prov) = generate_synthetic(3, 20, 8, 500, 250.0, 7).unwrap();
        let welch = crate::dsp::WelchConfig::default();
        for k in 0..3 {
            let ch = prov.class_pairs[k].0;
            let band = (prov.class_freqs_hz[k] - 2.0, prov.class_freqs_hz[k] + 2.0);
            let mut own = (0.0, 0usize);
            let mut other = (0.0, 0usize);
            for t in 0..epochs.n_trials() {
                let psd =
                    crate::dsp::welch_psd(epochs.trial(t).row(ch), 250.0, &welch).unwrap();
                let p = crate::features::band_power(&psd, band).unwrap();
                if epochs.labels()[t] == k {
                    own = (own.0 + p, own.1 + 1);
                } else {
                    other = (other.0 + p, other.1 + 1);
                }
            }
            let ratio = (own.0 / own.1 as f64) / (other.0 / other.1 as f64);
            assert!(
                ratio >= 2.0,
                "class {k}: band-power ratio {ratio} below 2 on channel {ch}"
            );
        }
    }

    #[test]
    fn csp_logvar_and_a_linear_baseline_separate_the_default_config() {
        let (epochs, _) = generate_synthetic(3, 40, 8, 500, 250.0, 21).unwrap();
        let (train_idx, test_idx) = stratified_split(epochs.labels(), 0.2, 5).unwrap();
        let train = epochs.select(&train_idx).unwrap();
        let test = epochs.select(&test_idx).unwrap();

        let model = fit_csp_ovr(&train, 3).unwrap();
        let train_feats =
            csp_logvar_features(&csp_space_transform(&model, &train).unwrap()).unwrap();
        let test_feats =
            csp_logvar_features(&csp_space_transform(&model, &test).unwrap()).unwrap();

        let baseline = fit_linear_baseline(&train_feats).unwrap();
        let predictions = predict_baseline(&baseline, &test_feats);
        let correct = predictions
            .iter()
            .zip(test_feats.labels())
            .filter(|(p, l)| p == l)
            .count();
        let accuracy = correct as f64 / predictions.len() as f64;
        assert!(
            accuracy >= 0.95,
            "linear baseline on CSP log-variance reached only {accuracy}"
        );
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(generate_synthetic(0, 10, 8, 100, 250.0, 1).is_err());
        assert!(generate_synthetic(3, 0, 8, 100, 250.0, 1).is_err());
        assert!(generate_synthetic(3, 10, 1, 100, 250.0, 1).is_err());
        assert!(generate_synthetic(3, 10, 8, 0, 250.0, 1).is_err());
        // Top class frequency for 3 classes is 26.33 Hz; 50 Hz is too slow.
        assert!(generate_synthetic(3, 10, 8, 100, 50.0, 1).is_err());
    }
}
