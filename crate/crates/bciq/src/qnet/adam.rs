//! Adam with inverse-time learning-rate decay and global-norm gradient
//! clipping, operating on the flat parameter vector.

use serde::{Deserialize, Serialize};

use super::params::QNetworkParams;
use super::QNetError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, decay: f64) -> AdamConfig {
        AdamConfig {
            learning_rate,
            decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            clip_norm: 1.0,
        }
    }
}

/// First and second moment estimates plus the global step counter. The
/// counter drives both bias correction and the decayed learning rate
/// `lr_t = lr_0 / (1 + decay * t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> AdamState {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }
}

/// Apply one update. Gradients are clipped to `clip_norm` in global L2 norm
/// before entering the moment estimates; a non-finite gradient refuses the
/// whole step and leaves parameters and state untouched. Returns the
/// effective learning rate that was applied.
pub fn adam_step(
    params: &mut QNetworkParams,
    state: &mut AdamState,
    config: &AdamConfig,
    grads: &[f64],
) -> Result<f64, QNetError> {
    let n = params.values().len();
    if grads.len() != n || state.m.len() != n {
        return Err(QNetError::InvalidParameter(format!(
            "gradient/state length {} or {} differs from {n} parameters",
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(QNetError::NumericError(
            "gradient contains non-finite entries; step refused".into(),
        ));
    }

    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    let scale = if norm > config.clip_norm {
        config.clip_norm / norm
    } else {
        1.0
    };

    let lr = config.learning_rate / (1.0 + config.decay * state.step as f64);
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);

    let values = params.values_mut();
    for i in 0..n {
        let g = grads[i] * scale;
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        values[i] -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Rng;
    use crate::qnet::QNetworkSpec;

    fn setup() -> (QNetworkSpec, QNetworkParams, AdamState) {
        let spec = QNetworkSpec::tiny_for_tests();
        let params = QNetworkParams::init(&spec, &mut Rng::new(77));
        let state = AdamState::new(params.values().len());
        (spec, params, state)
    }

    #[test]
    fn first_step_moves_a_lone_parameter_by_about_the_learning_rate() {
        let (_, mut params, mut state) = setup();
        let config = AdamConfig::new(0.0055, 1e-4);
        let mut grads = vec![0.0; params.values().len()];
        grads[3] = 1.0;
        let before = params.values().to_vec();

        let lr = adam_step(&mut params, &mut state, &config, &grads).unwrap();
        assert_eq!(lr, 0.0055, "step 0 uses the base learning rate");

        let delta = before[3] - params.values()[3];
        assert!(
            (delta - 0.0055).abs() < 1e-6 * 0.0055,
            "moved {delta}, expected about 0.0055"
        );
        for (i, (b, a)) in before.iter().zip(params.values()).enumerate() {
            if i != 3 {
                assert_eq!(b, a, "zero-gradient parameter {i} moved");
            }
        }
    }

    #[test]
    fn learning_rate_follows_inverse_time_decay() {
        let (_, mut params, mut state) = setup();
        let config = AdamConfig::new(0.0005, 0.001);
        state.step = 10_000;
        let grads = vec![1e-3; params.values().len()];
        let lr = adam_step(&mut params, &mut state, &config, &grads).unwrap();
        assert!((lr - 0.0005 / 11.0).abs() < 1e-18);
        assert_eq!(state.step, 10_001);
    }

    #[test]
    fn gradients_above_the_clip_norm_are_rescaled_globally() {
        let (_, mut params, mut state) = setup();
        let config = AdamConfig::new(0.01, 0.0);
        let n = params.values().len();
        // Global norm 5: every component should enter the moments at g / 5.
        let g = 5.0 / (n as f64).sqrt();
        let grads = vec![g; n];
        adam_step(&mut params, &mut state, &config, &grads).unwrap();
        let expected_m = 0.1 * g / 5.0;
        for &m in &state.m {
            assert!((m - expected_m).abs() < 1e-15);
        }
    }

    #[test]
    fn sub_threshold_gradients_are_not_rescaled() {
        let (_, mut params, mut state) = setup();
        let config = AdamConfig::new(0.01, 0.0);
        let mut grads = vec![0.0; params.values().len()];
        grads[0] = 0.5;
        adam_step(&mut params, &mut state, &config, &grads).unwrap();
        assert!((state.m[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradients_refuse_the_step() {
        let (_, mut params, mut state) = setup();
        let config = AdamConfig::new(0.01, 0.0);
        let before = params.clone();
        let mut grads = vec![0.0; params.values().len()];
        grads[10] = f64::NAN;
        let err = adam_step(&mut params, &mut state, &config, &grads).unwrap_err();
        assert!(matches!(err, QNetError::NumericError(_)));
        assert_eq!(params, before, "refused step must not touch parameters");
        assert_eq!(state.step, 0);
    }

    #[test]
    fn repeated_steps_descend_a_quadratic() {
        let (_, mut params, mut state) = setup();
        let config = AdamConfig::new(0.01, 0.0);
        let norm = |p: &QNetworkParams| p.values().iter().map(|v| v * v).sum::<f64>();
        let start = norm(&params);
        for _ in 0..500 {
            let grads: Vec<f64> = params.values().iter().map(|&v| 2.0 * v).collect();
            adam_step(&mut params, &mut state, &config, &grads).unwrap();
        }
        let end = norm(&params);
        assert!(
            end < 0.05 * start,
            "500 Adam steps on sum(w^2) left {end:.4} of {start:.4}"
        );
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let (_, mut params, mut state) = setup();
        let config = AdamConfig::new(0.01, 0.0);
        let grads = vec![0.0; 3];
        assert!(matches!(
            adam_step(&mut params, &mut state, &config, &grads),
            Err(QNetError::InvalidParameter(_))
        ));
    }
}
