use num_complex::Complex64;
use std::f64::consts::PI;

use super::DspError;

/// One second-order section with `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Stability triangle for real second-order denominators.
    fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }
}

/// Cascade of second-order sections plus the design metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    sections: Vec<Biquad>,
    low_hz: f64,
    high_hz: f64,
    fs_hz: f64,
    order: usize,
}

impl BiquadCascade {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn band_hz(&self) -> (f64, f64) {
        (self.low_hz, self.high_hz)
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fs_hz
    }

    /// Complex frequency response `H(e^{j 2 pi f / fs})`.
    pub fn response_at(&self, f_hz: f64) -> Complex64 {
        let w = 2.0 * PI * f_hz / self.fs_hz;
        let z1 = Complex64::new(w.cos(), -w.sin()); // z^{-1}
        let z2 = z1 * z1;
        let mut h = Complex64::new(1.0, 0.0);
        for s in &self.sections {
            let num = Complex64::new(s.b0, 0.0) + z1 * s.b1 + z2 * s.b2;
            let den = Complex64::new(1.0, 0.0) + z1 * s.a1 + z2 * s.a2;
            h *= num / den;
        }
        h
    }
}

/// Digital Butterworth bandpass via the bilinear transform.
///
/// `order` counts total poles and must be even; the lowpass prototype has
/// `order/2` poles, each mapped to a pair of bandpass poles by solving
/// `s^2 - p*bw*s + w0^2 = 0` on the prewarped axis (`w = 2 fs tan(pi f / fs)`,
/// `w0 = sqrt(w_lo * w_hi)`, `bw = w_hi - w_lo`). Every section carries the
/// bandpass zeros at z = +1 and z = -1; the overall gain is normalized
/// numerically to unity at the center frequency, spread evenly across
/// sections.
pub fn design_butterworth_bandpass(
    low_hz: f64,
    high_hz: f64,
    fs_hz: f64,
    order: usize,
) -> Result<BiquadCascade, DspError> {
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(DspError::InvalidParameter(format!(
            "sample rate must be positive, got {fs_hz}"
        )));
    }
    if !(low_hz.is_finite() && high_hz.is_finite()) || low_hz <= 0.0 || low_hz >= high_hz {
        return Err(DspError::InvalidParameter(format!(
            "need 0 < low < high, got ({low_hz}, {high_hz})"
        )));
    }
    if high_hz >= fs_hz / 2.0 {
        return Err(DspError::InvalidParameter(format!(
            "high edge {high_hz} Hz must be below Nyquist {} Hz",
            fs_hz / 2.0
        )));
    }
    if order == 0 || order % 2 != 0 {
        return Err(DspError::InvalidParameter(format!(
            "order must be even and positive, got {order}"
        )));
    }

    let warp = |f: f64| 2.0 * fs_hz * (PI * f / fs_hz).tan();
    let w_lo = warp(low_hz);
    let w_hi = warp(high_hz);
    let w0 = (w_lo * w_hi).sqrt();
    let bw = w_hi - w_lo;

    // Lowpass prototype poles on the unit circle, left half-plane.
    let n_lp = order / 2;
    let lp_poles: Vec<Complex64> = (0..n_lp)
        .map(|k| {
            let theta = PI * (2 * k + n_lp + 1) as f64 / (2 * n_lp) as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect();

    let bilinear = |s: Complex64| {
        let two_fs = Complex64::new(2.0 * fs_hz, 0.0);
        (two_fs + s) / (two_fs - s)
    };

    // Conjugate-paired section from a single complex pole.
    let section_from_pole = |z: Complex64| Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: -1.0,
        a1: -2.0 * z.re,
        a2: z.norm_sqr(),
    };

    let mut sections: Vec<Biquad> = Vec::with_capacity(order / 2);
    let real_tol = 1e-12;
    for p in lp_poles {
        // Bandpass transform: roots of s^2 - p*bw*s + w0^2.
        let half = p * (bw / 2.0);
        let disc = (half * half - Complex64::new(w0 * w0, 0.0)).sqrt();
        let s1 = half + disc;
        let s2 = half - disc;
        if p.im.abs() > real_tol {
            if p.im < 0.0 {
                // The conjugate prototype pole produces the mirrored sections.
                continue;
            }
            sections.push(section_from_pole(bilinear(s1)));
            sections.push(section_from_pole(bilinear(s2)));
        } else {
            // Real prototype pole: its two bandpass poles share one section.
            let z1 = bilinear(s1);
            let z2 = bilinear(s2);
            if z1.im.abs() > real_tol {
                sections.push(section_from_pole(z1));
            } else {
                sections.push(Biquad {
                    b0: 1.0,
                    b1: 0.0,
                    b2: -1.0,
                    a1: -(z1.re + z2.re),
                    a2: z1.re * z2.re,
                });
            }
        }
    }

    let mut cascade = BiquadCascade {
        sections,
        low_hz,
        high_hz,
        fs_hz,
        order,
    };

    // Normalize to unit gain at the digital frequency whose prewarped image
    // is w0, distributing the correction evenly across sections.
    let f_center = fs_hz / PI * (w0 / (2.0 * fs_hz)).atan();
    let gain = cascade.response_at(f_center).norm();
    if !(gain.is_finite() && gain > 0.0) {
        return Err(DspError::InvalidParameter(format!(
            "degenerate design: center gain {gain}"
        )));
    }
    let per_section = (1.0 / gain).powf(1.0 / cascade.sections.len() as f64);
    for s in &mut cascade.sections {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }

    for (i, s) in cascade.sections.iter().enumerate() {
        if !s.is_stable() {
            return Err(DspError::Unstable(format!(
                "section {i} has poles outside the unit circle (a1={}, a2={})",
                s.a1, s.a2
            )));
        }
    }
    Ok(cascade)
}

/// One forward pass of the cascade (transposed direct form II, zero initial
/// state — the caller's reflection padding absorbs the transient).
fn cascade_forward(filter: &BiquadCascade, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in filter.sections() {
        let mut z1 = 0.0;
        let mut z2 = 0.0;
        for v in &mut y {
            let xin = *v;
            let out = s.b0 * xin + z1;
            z1 = s.b1 * xin - s.a1 * out + z2;
            z2 = s.b2 * xin - s.a2 * out;
            *v = out;
        }
    }
    y
}

/// Zero-phase filtering: forward pass, reverse, second pass, reverse.
///
/// Both ends are extended by odd reflection (`2 x[0] - x[i]`) of length
/// `3 * (2 * order + 1)` before filtering and trimmed after, which suppresses
/// the start-up transient of each pass. The squared magnitude response this
/// produces has zero phase everywhere.
pub fn filtfilt(filter: &BiquadCascade, x: &[f64]) -> Result<Vec<f64>, DspError> {
    let settle = 6 * filter.order();
    if x.len() <= 3 * settle {
        return Err(DspError::DegenerateInput(format!(
            "signal of {} samples is too short for order {} (need more than {})",
            x.len(),
            filter.order(),
            3 * settle
        )));
    }
    let pad = 3 * (2 * filter.order() + 1);
    let n = x.len();
    debug_assert!(pad < n);

    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in 0..pad {
        ext.push(2.0 * x[0] - x[pad - i]);
    }
    ext.extend_from_slice(x);
    for i in 0..pad {
        ext.push(2.0 * x[n - 1] - x[n - 2 - i]);
    }

    let mut y = cascade_forward(filter, &ext);
    y.reverse();
    let mut y = cascade_forward(filter, &y);
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}
