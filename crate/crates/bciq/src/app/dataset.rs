//! Binary trial container. The layout is fixed so files written here can be
//! produced or consumed by other tools:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "MIEG"
//!      4     4  version, u32 = 1
//!      8     4  n_trials, u32
//!     12     4  n_channels, u32
//!     16     4  n_samples, u32
//!     20     4  sample rate in Hz, f32
//!     24     4  n_classes, u32
//!     28    2T  labels, u16 each
//!   28+2T   4TCS  samples, f32, trial-major then channel-major then time
//! ```
//!
//! All integers and floats are little-endian. Sample values are stored at
//! f32 precision: a round trip is bit-exact exactly when the in-memory
//! values are f32-representable (which everything written by this crate is).

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::dsp::EpochSet;
use crate::mathcore::Matrix;

use super::AppError;

const MAGIC: &[u8; 4] = b"MIEG";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

fn header_err(what: impl Into<String>) -> AppError {
    AppError::Format(what.into())
}

/// Expected total file length for the given header counts.
fn expected_len(n_trials: u64, n_channels: u64, n_samples: u64) -> u64 {
    HEADER_LEN as u64 + 2 * n_trials + 4 * n_trials * n_channels * n_samples
}

/// Write an epoch set to `path`. Sample values are narrowed to f32.
pub fn save_dataset(path: impl AsRef<Path>, epochs: &EpochSet) -> Result<(), AppError> {
    let path = path.as_ref();
    let n_trials = epochs.n_trials();
    let n_channels = epochs.n_channels();
    let n_samples = epochs.n_samples();
    if n_trials > u32::MAX as usize
        || n_channels > u32::MAX as usize
        || n_samples > u32::MAX as usize
        || epochs.n_classes() > u16::MAX as usize + 1
    {
        return Err(AppError::InvalidParameter(
            "dataset too large for the container header".into(),
        ));
    }

    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(n_trials as u32).to_le_bytes())?;
    w.write_all(&(n_channels as u32).to_le_bytes())?;
    w.write_all(&(n_samples as u32).to_le_bytes())?;
    w.write_all(&(epochs.sample_rate_hz() as f32).to_le_bytes())?;
    w.write_all(&(epochs.n_classes() as u32).to_le_bytes())?;
    for &label in epochs.labels() {
        w.write_all(&(label as u16).to_le_bytes())?;
    }
    for trial in epochs.trials() {
        for ch in 0..n_channels {
            for &v in trial.row(ch) {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset written by [`save_dataset`]. The file is validated
/// against the layout before any tensor is built: magic, version, and the
/// exact byte length implied by the header.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<EpochSet, AppError> {
    let bytes = fs::read(path.as_ref())?;
    parse_dataset(&bytes)
}

pub(crate) fn parse_dataset(bytes: &[u8]) -> Result<EpochSet, AppError> {
    if bytes.len() < HEADER_LEN {
        return Err(header_err(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(header_err(format!(
            "bad magic {:02x?}, expected {MAGIC:02x?}",
            &bytes[0..4]
        )));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(header_err(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let n_trials = u32_at(8) as usize;
    let n_channels = u32_at(12) as usize;
    let n_samples = u32_at(16) as usize;
    let sample_rate = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let n_classes = u32_at(24) as usize;

    if n_trials == 0 || n_channels == 0 || n_samples == 0 {
        return Err(header_err(format!(
            "degenerate header: {n_trials} trials x {n_channels} channels x {n_samples} samples"
        )));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(header_err(format!("bad sample rate {sample_rate}")));
    }
    if n_classes == 0 {
        return Err(header_err("header claims zero classes"));
    }

    let expected = expected_len(n_trials as u64, n_channels as u64, n_samples as u64);
    if bytes.len() as u64 != expected {
        return Err(header_err(format!(
            "size mismatch: header implies {expected} bytes, file has {}",
            bytes.len()
        )));
    }

    let mut labels = Vec::with_capacity(n_trials);
    let mut cursor = &bytes[HEADER_LEN..];
    for t in 0..n_trials {
        let mut buf = [0u8; 2];
        cursor.read_exact(&mut buf)?;
        let label = u16::from_le_bytes(buf) as usize;
        if label >= n_classes {
            return Err(header_err(format!(
                "trial {t} has label {label}, header allows 0..{n_classes}"
            )));
        }
        labels.push(label);
    }

    let mut trials = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let mut m = Matrix::zeros(n_channels, n_samples);
        for ch in 0..n_channels {
            for v in m.row_mut(ch) {
                let mut buf = [0u8; 4];
                cursor.read_exact(&mut buf)?;
                *v = f32::from_le_bytes(buf) as f64;
            }
        }
        trials.push(m);
    }

    let fs = sample_rate as f64;
    EpochSet::new(
        trials,
        labels,
        n_classes,
        fs,
        (0.0, n_samples as f64 / fs),
    )
    .map_err(|e| header_err(format!("payload rejected: {e}")))
}
