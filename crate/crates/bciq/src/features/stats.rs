use super::FeatureError;

/// Names of the `stat_vector` entries, in output order.
pub const STAT_NAMES: [&str; 5] = ["kurtosis", "skewness", "rms", "ptp", "absdiff1"];

fn mean_and_sample_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sample kurtosis:
/// `n(n+1)/((n-1)(n-2)(n-3)) * sum(((x - mean)/s)^4) - 3(n-1)^2/((n-2)(n-3))`
/// with `s` the (n-1)-divisor standard deviation. Zero for large normal
/// samples.
pub fn kurtosis(x: &[f64]) -> Result<f64, FeatureError> {
    let n = x.len();
    if n < 4 {
        return Err(FeatureError::DegenerateInput(format!(
            "kurtosis needs at least 4 samples, got {n}"
        )));
    }
    let (mean, s) = mean_and_sample_std(x);
    if s <= 0.0 {
        return Err(FeatureError::ConstantSignal(
            "kurtosis of a constant signal".into(),
        ));
    }
    let nf = n as f64;
    let sum4: f64 = x.iter().map(|v| ((v - mean) / s).powi(4)).sum();
    let lead = nf * (nf + 1.0) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    let tail = 3.0 * (nf - 1.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0));
    Ok(lead * sum4 - tail)
}

/// Sample skewness: `n/((n-1)(n-2)) * sum(((x - mean)/s)^3)`.
pub fn skewness(x: &[f64]) -> Result<f64, FeatureError> {
    let n = x.len();
    if n < 3 {
        return Err(FeatureError::DegenerateInput(format!(
            "skewness needs at least 3 samples, got {n}"
        )));
    }
    let (mean, s) = mean_and_sample_std(x);
    if s <= 0.0 {
        return Err(FeatureError::ConstantSignal(
            "skewness of a constant signal".into(),
        ));
    }
    let nf = n as f64;
    let sum3: f64 = x.iter().map(|v| ((v - mean) / s).powi(3)).sum();
    Ok(nf / ((nf - 1.0) * (nf - 2.0)) * sum3)
}

/// Root mean square.
pub fn rms(x: &[f64]) -> Result<f64, FeatureError> {
    if x.is_empty() {
        return Err(FeatureError::DegenerateInput("rms of empty vector".into()));
    }
    Ok((x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt())
}

/// Peak-to-peak amplitude, `max - min`.
pub fn peak_to_peak(x: &[f64]) -> Result<f64, FeatureError> {
    if x.is_empty() {
        return Err(FeatureError::DegenerateInput("ptp of empty vector".into()));
    }
    let max = x.iter().fold(f64::MIN, |m, &v| m.max(v));
    let min = x.iter().fold(f64::MAX, |m, &v| m.min(v));
    Ok(max - min)
}

/// Sum of absolute differences between paired entries.
pub fn abs_diff(x: &[f64], y: &[f64]) -> Result<f64, FeatureError> {
    if x.len() != y.len() {
        return Err(FeatureError::InvalidParameter(format!(
            "abs_diff length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum())
}

/// The five per-signal statistics in `STAT_NAMES` order. The last entry is
/// `abs_diff` of the signal against itself shifted one sample — total
/// first-difference variation, a roughness measure.
pub fn stat_vector(x: &[f64]) -> Result<Vec<f64>, FeatureError> {
    let n = x.len();
    if n < 4 {
        return Err(FeatureError::DegenerateInput(format!(
            "stat_vector needs at least 4 samples, got {n}"
        )));
    }
    Ok(vec![
        kurtosis(x)?,
        skewness(x)?,
        rms(x)?,
        peak_to_peak(x)?,
        abs_diff(&x[1..], &x[..n - 1])?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Rng;
    use proptest::prelude::*;

    #[test]
    fn kurtosis_on_four_points() {
        // By hand for [1,2,3,4]: s^2 = 5/3, sum((d/s)^4) = 10.25 * 9/25 = 3.69,
        // lead = 20/6, tail = 27/2, so 10/3 * 3.69 - 13.5 = -1.2.
        let k = kurtosis(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((k - (-1.2)).abs() < 1e-12, "kurtosis {k}");
    }

    #[test]
    fn kurtosis_rejects_constant_and_short() {
        assert!(matches!(
            kurtosis(&[5.0, 5.0, 5.0, 5.0]),
            Err(FeatureError::ConstantSignal(_))
        ));
        assert!(matches!(
            kurtosis(&[1.0, 2.0, 3.0]),
            Err(FeatureError::DegenerateInput(_))
        ));
    }

    #[test]
    fn gaussian_sample_has_near_zero_kurtosis_and_skewness() {
        let mut rng = Rng::new(6);
        let x: Vec<f64> = (0..1_000_000).map(|_| rng.normal()).collect();
        let k = kurtosis(&x).unwrap();
        let s = skewness(&x).unwrap();
        assert!(k.abs() < 0.05, "kurtosis {k}");
        assert!(s.abs() < 0.05, "skewness {s}");
    }

    #[test]
    fn skewness_symmetric_is_zero() {
        assert!(skewness(&[1.0, 2.0, 3.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn skewness_one_sided_outlier() {
        // By hand for [1,1,1,10]: s = 4.5, sum((d/s)^3) = 3, prefactor 2/3.
        let s = skewness(&[1.0, 1.0, 1.0, 10.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-12, "skewness {s}");
        // Mirrored data negates the statistic exactly.
        let neg = skewness(&[-10.0, -1.0, -1.0, -1.0]).unwrap();
        assert!((neg + 2.0).abs() < 1e-12, "skewness {neg}");
    }

    #[test]
    fn rms_ptp_absdiff_small_cases() {
        assert!((rms(&[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((peak_to_peak(&[-1.0, 5.0, 2.0]).unwrap() - 6.0).abs() < 1e-15);
        assert!((abs_diff(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() - 4.0).abs() < 1e-15);
        assert!(abs_diff(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rms(&[]).is_err());
        assert!(peak_to_peak(&[]).is_err());
    }

    #[test]
    fn stat_vector_order_and_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let v = stat_vector(&x).unwrap();
        assert_eq!(v.len(), STAT_NAMES.len());
        assert_eq!(
            STAT_NAMES,
            ["kurtosis", "skewness", "rms", "ptp", "absdiff1"]
        );
        assert!((v[0] - kurtosis(&x).unwrap()).abs() < 1e-15);
        assert!((v[1] - skewness(&x).unwrap()).abs() < 1e-15);
        assert!((v[2] - rms(&x).unwrap()).abs() < 1e-15);
        assert!((v[3] - peak_to_peak(&x).unwrap()).abs() < 1e-15);
        // Unit steps: total first-difference variation is 3.
        assert!((v[4] - 3.0).abs() < 1e-15);
        assert!(matches!(
            stat_vector(&[2.0, 2.0, 2.0, 2.0]),
            Err(FeatureError::ConstantSignal(_))
        ));
    }

    proptest! {
        // Shape statistics ignore affine rescaling; amplitude statistics
        // scale linearly, exactly as the formulas dictate.
        #[test]
        fn affine_covariance(seed in 0u64..300, a in 0.1f64..50.0, b in -20.0f64..20.0) {
            let mut rng = Rng::new(seed);
            let x: Vec<f64> = (0..64).map(|_| rng.normal()).collect();
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();

            let kx = kurtosis(&x).unwrap();
            let ky = kurtosis(&y).unwrap();
            prop_assert!((kx - ky).abs() < 1e-9 * kx.abs().max(1.0));

            let sx = skewness(&x).unwrap();
            let sy = skewness(&y).unwrap();
            prop_assert!((sx - sy).abs() < 1e-9 * sx.abs().max(1.0));

            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            let r = rms(&scaled).unwrap();
            prop_assert!((r - a * rms(&x).unwrap()).abs() < 1e-9 * r.max(1.0));

            let p = peak_to_peak(&y).unwrap();
            prop_assert!((p - a * peak_to_peak(&x).unwrap()).abs() < 1e-9 * p.max(1.0));
        }
    }
}
