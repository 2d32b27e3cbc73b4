use num_complex::Complex64;
use std::f64::consts::PI;

/// Forward DFT, `X[k] = sum_n x[n] * e^{-2*pi*i*k*n/N}`.
///
/// Power-of-two lengths take the radix-2 path; anything else falls back to
/// the direct summation. Twiddles are computed from the angle at every index
/// rather than by running products, keeping rounding error flat so the
/// radix-2 path agrees with the direct form to well under 1e-10 relative.
pub(crate) fn dft(x: &[Complex64]) -> Vec<Complex64> {
    if x.len() > 1 && x.len().is_power_of_two() {
        let mut buf = x.to_vec();
        fft_radix2(&mut buf);
        buf
    } else {
        dft_direct(x)
    }
}

fn fft_radix2(buf: &mut [Complex64]) {
    let n = buf.len();
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let ang = -2.0 * PI * k as f64 / len as f64;
                let w = Complex64::new(ang.cos(), ang.sin());
                let u = buf[start + k];
                let v = buf[start + k + half] * w;
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

fn dft_direct(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                acc += v * Complex64::new(ang.cos(), ang.sin());
            }
            acc
        })
        .collect()
}
