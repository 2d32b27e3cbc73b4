use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{fft::dft, round_samples, DspError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Power spectral density, units^2 per Hz: divide by `fs * sum(w^2)`.
    Density,
    /// Power spectrum, units^2: divide by `sum(w)^2`.
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    Constant,
}

/// Welch estimator parameters. Defaults: Hann window, 50% overlap, constant
/// detrend, median averaging, density scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelchConfig {
    pub nfft: usize,
    pub overlap: f64,
    pub window: WindowKind,
    pub averaging: Averaging,
    pub scaling: Scaling,
    pub detrend: Detrend,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            nfft: 256,
            overlap: 0.5,
            window: WindowKind::Hann,
            averaging: Averaging::Median,
            scaling: Scaling::Density,
            detrend: Detrend::Constant,
        }
    }
}

/// One-sided spectral estimate with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    pub psd: Vec<f64>,
    pub nfft: usize,
    pub overlap_fraction: f64,
    pub window_kind: WindowKind,
    pub averaging_kind: Averaging,
    pub scaling: Scaling,
}

fn window_values(kind: WindowKind, len: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => vec![1.0; len],
        // Periodic Hann, matching the DFT's implicit periodic extension.
        WindowKind::Hann => (0..len)
            .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / len as f64).cos()))
            .collect(),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Welch power spectral density.
///
/// The signal is cut into segments of length `nfft` with hop
/// `round(nfft * (1 - overlap))`, each segment is detrended, windowed, and
/// transformed, and the squared magnitudes are combined across segments by
/// mean or plain median per frequency bin. The one-sided result doubles all
/// bins except DC and (for even `nfft`) Nyquist.
pub fn welch_psd(x: &[f64], fs_hz: f64, cfg: &WelchConfig) -> Result<PsdEstimate, DspError> {
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(DspError::InvalidParameter(format!(
            "sample rate must be positive, got {fs_hz}"
        )));
    }
    if cfg.nfft < 8 {
        return Err(DspError::InvalidParameter(format!(
            "nfft must be at least 8, got {}",
            cfg.nfft
        )));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(DspError::InvalidParameter(format!(
            "overlap must lie in [0, 1), got {}",
            cfg.overlap
        )));
    }
    if x.len() < cfg.nfft {
        return Err(DspError::DegenerateInput(format!(
            "signal of {} samples is shorter than nfft {}",
            x.len(),
            cfg.nfft
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(DspError::InvalidParameter("non-finite sample".into()));
    }

    let l = cfg.nfft;
    let hop = (round_samples(l as f64 * (1.0 - cfg.overlap)).max(1)) as usize;
    let n_segments = 1 + (x.len() - l) / hop;

    let w = window_values(cfg.window, l);
    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();
    let scale = match cfg.scaling {
        Scaling::Density => 1.0 / (fs_hz * sum_w2),
        Scaling::Spectrum => 1.0 / (sum_w * sum_w),
    };

    let n_bins = l / 2 + 1;
    let nyquist_bin = if l % 2 == 0 { Some(l / 2) } else { None };
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::with_capacity(n_segments); n_bins];

    let mut seg = vec![Complex64::new(0.0, 0.0); l];
    for s in 0..n_segments {
        let start = s * hop;
        let slice = &x[start..start + l];
        let offset = match cfg.detrend {
            Detrend::None => 0.0,
            Detrend::Constant => slice.iter().sum::<f64>() / l as f64,
        };
        for (dst, &v) in seg.iter_mut().zip(slice) {
            *dst = Complex64::new(v - offset, 0.0);
        }
        for (i, v) in seg.iter_mut().enumerate() {
            *v *= w[i];
        }
        let spec = dft(&seg);
        for (k, bin) in per_bin.iter_mut().enumerate() {
            let mut p = spec[k].norm_sqr() * scale;
            if k != 0 && Some(k) != nyquist_bin {
                p *= 2.0;
            }
            bin.push(p);
        }
    }

    let psd: Vec<f64> = per_bin
        .iter_mut()
        .map(|bin| match cfg.averaging {
            Averaging::Mean => bin.iter().sum::<f64>() / bin.len() as f64,
            Averaging::Median => median(bin),
        })
        .collect();
    let freqs_hz: Vec<f64> = (0..n_bins).map(|k| k as f64 * fs_hz / l as f64).collect();

    Ok(PsdEstimate {
        freqs_hz,
        psd,
        nfft: cfg.nfft,
        overlap_fraction: cfg.overlap,
        window_kind: cfg.window,
        averaging_kind: cfg.averaging,
        scaling: cfg.scaling,
    })
}
