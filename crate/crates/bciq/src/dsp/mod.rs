//! Continuous-signal conditioning: Butterworth bandpass design, zero-phase
//! filtering, epoching, and Welch spectral estimation.

mod fft;
mod filter;
mod welch;

pub use filter::{design_butterworth_bandpass, filtfilt, Biquad, BiquadCascade};
pub use welch::{
    welch_psd, Averaging, Detrend, PsdEstimate, Scaling, WelchConfig, WindowKind,
};

use thiserror::Error;

use crate::mathcore::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("unstable filter: {0}")]
    Unstable(String),
}

/// The one rounding convention for time-to-sample conversion: half-to-even.
/// Every place a real-valued duration or offset becomes a sample count goes
/// through here.
pub(crate) fn round_samples(x: f64) -> i64 {
    x.round_ties_even() as i64
}

/// Continuous multichannel recording, channels by samples, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channel_names: Vec<String>,
    sample_rate_hz: f64,
    data: Matrix,
}

impl Recording {
    pub fn new(
        channel_names: Vec<String>,
        sample_rate_hz: f64,
        data: Matrix,
    ) -> Result<Self, DspError> {
        if channel_names.len() != data.rows() {
            return Err(DspError::InvalidParameter(format!(
                "{} channel names for {} data rows",
                channel_names.len(),
                data.rows()
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DspError::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            channel_names,
            sample_rate_hz,
            data,
        })
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn n_channels(&self) -> usize {
        self.data.rows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.cols()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }
}

/// Trials cut around events: per-trial channels-by-samples matrices with a
/// class label each, all sharing one shape and time window.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    trials: Vec<Matrix>,
    labels: Vec<usize>,
    n_classes: usize,
    sample_rate_hz: f64,
    window_s: (f64, f64),
}

impl EpochSet {
    pub fn new(
        trials: Vec<Matrix>,
        labels: Vec<usize>,
        n_classes: usize,
        sample_rate_hz: f64,
        window_s: (f64, f64),
    ) -> Result<Self, DspError> {
        if trials.len() != labels.len() {
            return Err(DspError::InvalidParameter(format!(
                "{} trials but {} labels",
                trials.len(),
                labels.len()
            )));
        }
        if trials.is_empty() {
            return Err(DspError::DegenerateInput("no trials".into()));
        }
        if n_classes == 0 {
            return Err(DspError::InvalidParameter("n_classes must be positive".into()));
        }
        if let Some((t, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(DspError::OutOfRange(format!(
                "trial {t} has label {l}, valid range is 0..{n_classes}"
            )));
        }
        let (rows, cols) = (trials[0].rows(), trials[0].cols());
        if let Some(t) = trials
            .iter()
            .position(|m| m.rows() != rows || m.cols() != cols)
        {
            return Err(DspError::InvalidParameter(format!(
                "trial {t} is {}x{}, expected {rows}x{cols}",
                trials[t].rows(),
                trials[t].cols()
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DspError::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        let (tmin, tmax) = window_s;
        if !(tmin < tmax) {
            return Err(DspError::InvalidParameter(format!(
                "window ({tmin}, {tmax}) must have tmin < tmax"
            )));
        }
        let expected = round_samples((tmax - tmin) * sample_rate_hz);
        if expected != cols as i64 {
            return Err(DspError::InvalidParameter(format!(
                "window ({tmin}, {tmax}) at {sample_rate_hz} Hz implies {expected} samples, trials have {cols}"
            )));
        }
        Ok(Self {
            trials,
            labels,
            n_classes,
            sample_rate_hz,
            window_s,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn n_channels(&self) -> usize {
        self.trials[0].rows()
    }

    pub fn n_samples(&self) -> usize {
        self.trials[0].cols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn window_s(&self) -> (f64, f64) {
        self.window_s
    }

    pub fn trial(&self, t: usize) -> &Matrix {
        &self.trials[t]
    }

    pub fn trials(&self) -> &[Matrix] {
        &self.trials
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Subset of trials by index, labels carried along.
    pub fn select(&self, indices: &[usize]) -> Result<EpochSet, DspError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_trials()) {
            return Err(DspError::OutOfRange(format!(
                "trial index {bad} out of 0..{}",
                self.n_trials()
            )));
        }
        EpochSet::new(
            indices.iter().map(|&i| self.trials[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.n_classes,
            self.sample_rate_hz,
            self.window_s,
        )
    }

    /// Narrow every trial to `[tmin_s, tmax_s)`, expressed on the same clock
    /// as this set's window.
    pub fn crop(&self, tmin_s: f64, tmax_s: f64) -> Result<EpochSet, DspError> {
        if !(tmin_s < tmax_s) {
            return Err(DspError::InvalidParameter(format!(
                "crop ({tmin_s}, {tmax_s}) must have tmin < tmax"
            )));
        }
        let fs = self.sample_rate_hz;
        let start = round_samples((tmin_s - self.window_s.0) * fs);
        let len = round_samples((tmax_s - tmin_s) * fs);
        if start < 0 || len < 1 || (start + len) as usize > self.n_samples() {
            return Err(DspError::OutOfRange(format!(
                "crop ({tmin_s}, {tmax_s}) maps to samples [{start}, {}) outside 0..{}",
                start + len,
                self.n_samples()
            )));
        }
        let (start, len) = (start as usize, len as usize);
        let trials: Vec<Matrix> = self
            .trials
            .iter()
            .map(|m| {
                let mut out = Matrix::zeros(m.rows(), len);
                for r in 0..m.rows() {
                    out.row_mut(r).copy_from_slice(&m.row(r)[start..start + len]);
                }
                out
            })
            .collect();
        EpochSet::new(
            trials,
            self.labels.clone(),
            self.n_classes,
            fs,
            (tmin_s, tmax_s),
        )
    }
}

/// Cut trials from a continuous recording.
///
/// Each trial spans `round((tmax - tmin) * fs)` samples starting at
/// `event + round(tmin * fs)` (inclusive). The class count is inferred as
/// `max(label) + 1`.
pub fn epoch(
    rec: &Recording,
    event_samples: &[usize],
    labels: &[usize],
    tmin_s: f64,
    tmax_s: f64,
) -> Result<EpochSet, DspError> {
    if event_samples.len() != labels.len() {
        return Err(DspError::InvalidParameter(format!(
            "{} events but {} labels",
            event_samples.len(),
            labels.len()
        )));
    }
    if event_samples.is_empty() {
        return Err(DspError::DegenerateInput("no events".into()));
    }
    if !(tmin_s < tmax_s) {
        return Err(DspError::InvalidParameter(format!(
            "window ({tmin_s}, {tmax_s}) must have tmin < tmax"
        )));
    }
    let fs = rec.sample_rate_hz();
    let len = round_samples((tmax_s - tmin_s) * fs);
    if len < 1 {
        return Err(DspError::InvalidParameter(format!(
            "window ({tmin_s}, {tmax_s}) at {fs} Hz spans no samples"
        )));
    }
    let len = len as usize;

    let mut trials = Vec::with_capacity(event_samples.len());
    for (t, &event) in event_samples.iter().enumerate() {
        let start = event as i64 + round_samples(tmin_s * fs);
        let end = start + len as i64;
        if start < 0 || end as usize > rec.n_samples() {
            return Err(DspError::OutOfRange(format!(
                "trial {t}: window [{start}, {end}) outside recording 0..{}",
                rec.n_samples()
            )));
        }
        let start = start as usize;
        let mut m = Matrix::zeros(rec.n_channels(), len);
        for ch in 0..rec.n_channels() {
            m.row_mut(ch)
                .copy_from_slice(&rec.data().row(ch)[start..start + len]);
        }
        trials.push(m);
    }
    let n_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    EpochSet::new(trials, labels.to_vec(), n_classes, fs, (tmin_s, tmax_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_recording(channels: usize, samples: usize, fs: f64) -> Recording {
        // data[ch][s] = ch * 1000 + s, so any slice is identifiable.
        let data = Matrix::new(
            channels,
            samples,
            (0..channels * samples)
                .map(|i| ((i / samples) * 1000 + i % samples) as f64)
                .collect(),
        )
        .unwrap();
        let names = (0..channels).map(|c| format!("ch{c}")).collect();
        Recording::new(names, fs, data).unwrap()
    }

    #[test]
    fn one_second_window_is_250_samples() {
        let rec = ramp_recording(2, 1000, 250.0);
        let set = epoch(&rec, &[0, 100], &[0, 1], 0.0, 1.0).unwrap();
        assert_eq!(set.n_samples(), 250);
        assert_eq!(set.n_trials(), 2);
        // Second trial starts at its event.
        assert_eq!(set.trial(1).get(0, 0), 100.0);
        assert_eq!(set.trial(1).get(1, 0), 1100.0);
    }

    #[test]
    fn half_sample_window_rounds_to_even() {
        // (3.25 - 2) * 250 = 312.5 -> 312 under half-to-even.
        let rec = ramp_recording(1, 2000, 250.0);
        let set = epoch(&rec, &[0], &[0], 2.0, 3.25).unwrap();
        assert_eq!(set.n_samples(), 312);
        // Start index = round(2.0 * 250) = 500.
        assert_eq!(set.trial(0).get(0, 0), 500.0);
    }

    #[test]
    fn negative_tmin_before_start_is_out_of_range() {
        let rec = ramp_recording(1, 1000, 250.0);
        let err = epoch(&rec, &[0], &[0], -0.5, 0.5).unwrap_err();
        assert!(matches!(err, DspError::OutOfRange(ref m) if m.contains("trial 0")));
    }

    #[test]
    fn window_past_end_is_out_of_range() {
        let rec = ramp_recording(1, 1000, 250.0);
        assert!(matches!(
            epoch(&rec, &[900], &[0], 0.0, 1.0),
            Err(DspError::OutOfRange(_))
        ));
    }

    #[test]
    fn labels_and_counts_survive_epoching() {
        let rec = ramp_recording(3, 5000, 250.0);
        let events = [0usize, 300, 600, 900, 1200];
        let labels = [2usize, 0, 1, 2, 0];
        let set = epoch(&rec, &events, &labels, 0.0, 1.0).unwrap();
        assert_eq!(set.n_trials(), 5);
        assert_eq!(set.labels(), &labels);
        assert_eq!(set.n_classes(), 3);
        let mut counts = [0usize; 3];
        for &l in set.labels() {
            counts[l] += 1;
        }
        assert_eq!(counts, [2, 1, 2]);
    }

    #[test]
    fn crop_selects_the_right_samples() {
        let rec = ramp_recording(2, 2000, 250.0);
        let set = epoch(&rec, &[0], &[0], 0.0, 4.0).unwrap();
        let cropped = set.crop(2.0, 3.25).unwrap();
        assert_eq!(cropped.n_samples(), 312);
        assert_eq!(cropped.window_s(), (2.0, 3.25));
        assert_eq!(cropped.trial(0).get(0, 0), 500.0);
        assert_eq!(cropped.trial(0).get(1, 311), 1811.0);
        assert!(set.crop(3.5, 4.5).is_err());
        assert!(set.crop(1.0, 1.0).is_err());
    }

    #[test]
    fn select_subsets_trials_with_labels() {
        let rec = ramp_recording(1, 5000, 250.0);
        let set = epoch(&rec, &[0, 250, 500, 750], &[0, 1, 0, 1], 0.0, 1.0).unwrap();
        let picked = set.select(&[3, 0]).unwrap();
        assert_eq!(picked.n_trials(), 2);
        assert_eq!(picked.labels(), &[1, 0]);
        assert_eq!(picked.trial(0).get(0, 0), 750.0);
        assert!(set.select(&[9]).is_err());
    }

    #[test]
    fn mismatched_construction_is_rejected() {
        let rec = ramp_recording(1, 1000, 250.0);
        assert!(epoch(&rec, &[0, 1], &[0], 0.0, 1.0).is_err());
        assert!(epoch(&rec, &[0], &[0], 1.0, 0.5).is_err());
        assert!(Recording::new(vec!["a".into()], 250.0, Matrix::zeros(2, 10)).is_err());
        assert!(Recording::new(vec!["a".into(), "b".into()], -1.0, Matrix::zeros(2, 10)).is_err());
    }
}
