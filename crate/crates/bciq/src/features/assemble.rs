use crate::dsp::{welch_psd, EpochSet, PsdEstimate, WelchConfig};

use super::stats::{stat_vector, STAT_NAMES};
use super::{FeatureError, FeatureLayout, FeatureTensor};

/// Trapezoidal integral of the spectral estimate over bins with
/// `lo <= f <= hi`.
pub fn band_power(psd: &PsdEstimate, band: (f64, f64)) -> Result<f64, FeatureError> {
    let (lo, hi) = band;
    if !(lo < hi) {
        return Err(FeatureError::InvalidParameter(format!(
            "band ({lo}, {hi}) must have lo < hi"
        )));
    }
    let idx = band_bins(psd, band);
    if idx.len() < 2 {
        return Err(FeatureError::InvalidParameter(format!(
            "band ({lo}, {hi}) covers {} bin(s) of a grid spanning {:.3}..{:.3} Hz",
            idx.len(),
            psd.freqs_hz.first().copied().unwrap_or(f64::NAN),
            psd.freqs_hz.last().copied().unwrap_or(f64::NAN),
        )));
    }
    let mut acc = 0.0;
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        acc += 0.5 * (psd.psd[i] + psd.psd[j]) * (psd.freqs_hz[j] - psd.freqs_hz[i]);
    }
    Ok(acc)
}

fn band_bins(psd: &PsdEstimate, (lo, hi): (f64, f64)) -> Vec<usize> {
    psd.freqs_hz
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= lo && f <= hi)
        .map(|(i, _)| i)
        .collect()
}

/// PSD values over each band in turn, with self-describing names.
fn band_psd_features(
    psd: &PsdEstimate,
    bands: &[(f64, f64)],
    prefix: &str,
) -> Result<(Vec<f64>, Vec<String>), FeatureError> {
    let mut values = Vec::new();
    let mut names = Vec::new();
    for &(lo, hi) in bands {
        let idx = band_bins(psd, (lo, hi));
        if idx.is_empty() {
            return Err(FeatureError::InvalidParameter(format!(
                "band ({lo}, {hi}) contains no PSD bins"
            )));
        }
        for i in idx {
            values.push(psd.psd[i]);
            names.push(format!("{prefix}psd{lo}-{hi}.f{:.3}", psd.freqs_hz[i]));
        }
    }
    Ok((values, names))
}

/// Flat per-trial feature vector: the five statistics for every channel,
/// then the in-band PSD bins of each requested channel.
pub fn assemble_1d(
    epochs: &EpochSet,
    psd_channels: &[usize],
    bands: &[(f64, f64)],
    welch: &WelchConfig,
) -> Result<FeatureTensor, FeatureError> {
    if let Some(&bad) = psd_channels.iter().find(|&&c| c >= epochs.n_channels()) {
        return Err(FeatureError::InvalidParameter(format!(
            "psd channel {bad} out of 0..{}",
            epochs.n_channels()
        )));
    }

    let mut names: Vec<String> = Vec::new();
    for ch in 0..epochs.n_channels() {
        for stat in STAT_NAMES {
            names.push(format!("ch{ch}.{stat}"));
        }
    }

    let mut data = Vec::with_capacity(epochs.n_trials());
    for t in 0..epochs.n_trials() {
        let trial = epochs.trial(t);
        let mut row = Vec::new();
        for ch in 0..epochs.n_channels() {
            row.extend(stat_vector(trial.row(ch))?);
        }
        for &ch in psd_channels {
            let psd = welch_psd(trial.row(ch), epochs.sample_rate_hz(), welch)?;
            let (values, psd_names) = band_psd_features(&psd, bands, &format!("ch{ch}."))?;
            if t == 0 {
                names.extend(psd_names);
            }
            row.extend(values);
        }
        data.push(row);
    }

    FeatureTensor::new(
        FeatureLayout::Flat1d,
        data,
        epochs.labels().to_vec(),
        epochs.n_classes(),
        names,
    )
}

/// Grid per-trial features: one row per component, each row the five
/// statistics followed by that component's in-band PSD bins.
pub fn assemble_2d(
    csp_epochs: &EpochSet,
    bands: &[(f64, f64)],
    welch: &WelchConfig,
) -> Result<FeatureTensor, FeatureError> {
    let components = csp_epochs.n_channels();
    if components == 0 {
        return Err(FeatureError::DegenerateInput("no components".into()));
    }

    let mut column_names: Vec<String> = STAT_NAMES.iter().map(|s| s.to_string()).collect();
    let mut data = Vec::with_capacity(csp_epochs.n_trials());
    for t in 0..csp_epochs.n_trials() {
        let trial = csp_epochs.trial(t);
        let mut row = Vec::new();
        for c in 0..components {
            row.extend(stat_vector(trial.row(c))?);
            let psd = welch_psd(trial.row(c), csp_epochs.sample_rate_hz(), welch)?;
            let (values, psd_names) = band_psd_features(&psd, bands, "")?;
            if t == 0 && c == 0 {
                column_names.extend(psd_names);
            }
            row.extend(values);
        }
        data.push(row);
    }

    FeatureTensor::new(
        FeatureLayout::Grid2d { components },
        data,
        csp_epochs.labels().to_vec(),
        csp_epochs.n_classes(),
        column_names,
    )
}
