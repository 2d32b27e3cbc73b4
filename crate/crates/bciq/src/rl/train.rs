//! DQN training against the classification environment, plus the greedy
//! reward-accuracy evaluation.

use serde::{Deserialize, Serialize};

use crate::mathcore::{Matrix, Rng};
use crate::qnet::{
    adam_step, backward, forward, regularization_loss, AdamConfig, AdamState, Mode, QNetError,
    QNetworkParams, QNetworkSpec,
};

use super::replay::{ReplayBuffer, Transition};
use super::{greedy_action, ClassificationEnv, EpsilonSchedule, RlError};

/// Training-loop knobs that the published description leaves open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnHyper {
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub target_sync_every: usize,
    pub gamma: f64,
    pub huber_delta: f64,
    pub adam: AdamConfig,
}

impl Default for DqnHyper {
    fn default() -> DqnHyper {
        DqnHyper {
            replay_capacity: 10_000,
            batch_size: 32,
            warmup_steps: 100,
            target_sync_every: 200,
            gamma: 0.99,
            huber_delta: 1.0,
            adam: AdamConfig::new(0.0055, 1e-4),
        }
    }
}

/// One environment interaction in the log. `loss` is present only for
/// steps that performed a gradient update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub interval: usize,
    pub epsilon: f64,
    pub reward: f64,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub steps: usize,
    pub mean_reward: f64,
    pub mean_loss: f64,
    pub refused_steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub steps: Vec<StepRecord>,
    pub intervals: Vec<IntervalSummary>,
    pub refused_steps: usize,
}

/// Huber loss and its derivative with respect to the residual.
fn huber(residual: f64, delta: f64) -> (f64, f64) {
    if residual.abs() <= delta {
        (0.5 * residual * residual, residual)
    } else {
        (
            delta * (residual.abs() - 0.5 * delta),
            delta * residual.signum(),
        )
    }
}

/// Bellman targets against a frozen target network:
/// `y = r + (1 - done) * gamma * max_a' Q_target(s', a')`, with the target
/// network evaluated in inference mode.
pub fn td_targets(
    batch: &[&Transition],
    target_params: &QNetworkParams,
    spec: &QNetworkSpec,
    gamma: f64,
) -> Result<Vec<f64>, RlError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(RlError::InvalidParameter(format!(
            "gamma {gamma} outside [0, 1]"
        )));
    }
    if batch.is_empty() {
        return Err(RlError::InvalidParameter("empty batch".into()));
    }
    let next_states: Vec<Matrix> = batch.iter().map(|t| t.next_state.clone()).collect();
    let (q_next, _) = forward(target_params, spec, &next_states, Mode::Inference, None)?;
    batch
        .iter()
        .zip(&q_next)
        .map(|(t, q)| {
            if t.done {
                Ok(t.reward)
            } else {
                let best = q
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(t.reward + gamma * best)
            }
        })
        .collect()
}

/// Run the DQN loop over the given step intervals. The first interval
/// explores with the epsilon schedule; later intervals exploit greedily
/// (epsilon forced to 0). Each step acts, stores the transition, and — once
/// the buffer holds `warmup_steps` transitions — performs one gradient
/// update on a uniformly sampled batch against a hard-synced target
/// network. Episodes auto-reset; a step whose gradient is refused by the
/// optimizer is counted, not fatal.
pub fn dqn_train(
    env: &mut ClassificationEnv,
    spec: &QNetworkSpec,
    params: &mut QNetworkParams,
    schedule: &EpsilonSchedule,
    intervals: &[usize],
    hyper: &DqnHyper,
    rng: &mut Rng,
) -> Result<TrainingLog, RlError> {
    if env.n_actions() != spec.n_actions {
        return Err(RlError::InvalidParameter(format!(
            "environment has {} classes but the network outputs {} actions",
            env.n_actions(),
            spec.n_actions
        )));
    }
    if env.observation_shape() != (spec.channels_in, spec.time_in) {
        return Err(RlError::InvalidParameter(format!(
            "observations are {:?}, the network expects ({}, {})",
            env.observation_shape(),
            spec.channels_in,
            spec.time_in
        )));
    }
    if hyper.batch_size == 0 {
        return Err(RlError::InvalidParameter("batch_size must be > 0".into()));
    }
    if hyper.target_sync_every == 0 {
        return Err(RlError::InvalidParameter(
            "target_sync_every must be > 0".into(),
        ));
    }

    let mut target = params.clone();
    let mut buffer = ReplayBuffer::new(hyper.replay_capacity)?;
    let mut adam_state = AdamState::new(params.values().len());
    let mut log = TrainingLog::default();
    let mut global_step = 0usize;
    let mut state = env.reset(rng);

    for (interval, &steps) in intervals.iter().enumerate() {
        let mut reward_sum = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let mut refused = 0usize;

        for _ in 0..steps {
            let epsilon = if interval == 0 {
                schedule.epsilon_at(global_step as u64)
            } else {
                0.0
            };

            let action = if rng.uniform() < epsilon {
                rng.below(spec.n_actions)
            } else {
                let (q, _) = forward(params, spec, &[state.clone()], Mode::Inference, None)?;
                greedy_action(&q[0])?
            };

            let (next_state, reward, done) = env.step(action)?;
            reward_sum += reward;
            buffer.push(Transition {
                state: state.clone(),
                action,
                reward,
                next_state: next_state.clone(),
                done,
            });
            state = if done { env.reset(rng) } else { next_state };

            let mut step_loss = None;
            if buffer.len() >= hyper.warmup_steps {
                let batch = buffer.sample(rng, hyper.batch_size)?;
                let targets = td_targets(&batch, &target, spec, hyper.gamma)?;
                let states: Vec<Matrix> = batch.iter().map(|t| t.state.clone()).collect();
                let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
                drop(batch);

                let (q, cache) = forward(params, spec, &states, Mode::Train, Some(rng))?;
                let scale = 1.0 / states.len() as f64;
                let mut grad = vec![vec![0.0; spec.n_actions]; states.len()];
                let mut loss = 0.0;
                for i in 0..states.len() {
                    let residual = q[i][actions[i]] - targets[i];
                    let (l, dl) = huber(residual, hyper.huber_delta);
                    loss += l * scale;
                    grad[i][actions[i]] = dl * scale;
                }
                loss += regularization_loss(params, spec);

                let grads = backward(params, spec, &cache, &grad)?;
                match adam_step(params, &mut adam_state, &hyper.adam, &grads) {
                    Ok(_) => {
                        let (mean, var) = cache
                            .running_stats_update()
                            .expect("train-mode cache carries running stats");
                        let (mean, var) = (mean.to_vec(), var.to_vec());
                        params.commit_running_stats(&mean, &var)?;
                        loss_sum += loss;
                        loss_count += 1;
                        step_loss = Some(loss);
                    }
                    Err(QNetError::NumericError(_)) => refused += 1,
                    Err(e) => return Err(e.into()),
                }
            }

            global_step += 1;
            if global_step % hyper.target_sync_every == 0 {
                target = params.clone();
            }
            log.steps.push(StepRecord {
                step: global_step,
                interval,
                epsilon,
                reward,
                loss: step_loss,
            });
        }

        log.intervals.push(IntervalSummary {
            steps,
            mean_reward: if steps > 0 {
                reward_sum / steps as f64
            } else {
                0.0
            },
            mean_loss: if loss_count > 0 {
                loss_sum / loss_count as f64
            } else {
                0.0
            },
            refused_steps: refused,
        });
        log.refused_steps += refused;
    }

    Ok(log)
}

/// Greedy evaluation: run `episodes` full passes with epsilon = 0 and
/// return the mean episode return normalized by the maximum attainable
/// return `N * r_correct`, clamped to [0, 1]. Under the (1, 0) structure
/// this is exactly classification accuracy.
pub fn evaluate_reward_accuracy(
    env: &mut ClassificationEnv,
    spec: &QNetworkSpec,
    params: &QNetworkParams,
    episodes: usize,
    rng: &mut Rng,
) -> Result<f64, RlError> {
    if env.reward_structure().r_correct() == 0.0 {
        return Err(RlError::InvalidParameter(
            "reward accuracy is undefined when r_correct = 0".into(),
        ));
    }
    if episodes == 0 {
        return Err(RlError::InvalidParameter("need at least one episode".into()));
    }

    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = env.reset(rng);
        loop {
            let (q, _) = forward(params, spec, &[state.clone()], Mode::Inference, None)?;
            let action = greedy_action(&q[0])?;
            let (next, _, done) = env.step(action)?;
            if done {
                break;
            }
            state = next;
        }
        total += env.episode_return();
    }

    let max_return = env.n_samples() as f64 * env.reward_structure().r_correct();
    let fraction = (total / episodes as f64) / max_return;
    Ok(fraction.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureLayout, FeatureTensor};
    use crate::qnet::HeadKind;
    use crate::rl::RewardStructure;

    fn tiny_net_spec(channels: usize, time: usize, actions: usize) -> QNetworkSpec {
        QNetworkSpec {
            channels_in: channels,
            time_in: time,
            conv1_filters: 8,
            conv1_kernel: 7,
            conv2_filters: 4,
            conv2_kernel: 5,
            max_pool: 2,
            avg_pool: 2,
            dropout_rate: 0.1,
            lstm_units: 4,
            dense_sizes: [8, 4],
            n_actions: actions,
            l1: 0.01,
            l2: 0.01,
            head: HeadKind::Linear,
        }
    }

    fn grid_dataset(
        n_trials: usize,
        n_classes: usize,
        channels: usize,
        time: usize,
        rng: &mut Rng,
        separation: f64,
    ) -> FeatureTensor {
        // Class k gets a bump of height `separation` on channel k; noise on top.
        let mut data = Vec::with_capacity(n_trials);
        let mut labels = Vec::with_capacity(n_trials);
        for t in 0..n_trials {
            let class = t % n_classes;
            let mut row = vec![0.0; channels * time];
            for c in 0..channels {
                for s in 0..time {
                    let mut v = 0.3 * rng.normal();
                    if c == class % channels {
                        v += separation;
                    }
                    row[c * time + s] = v;
                }
            }
            data.push(row);
            labels.push(class);
        }
        FeatureTensor::new(
            FeatureLayout::Grid2d {
                components: channels,
            },
            data,
            labels,
            n_classes,
            (0..time).map(|i| format!("f{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn huber_matches_hand_values_at_delta_one() {
        let (l, g) = huber(0.5, 1.0);
        assert!((l - 0.125).abs() < 1e-15);
        assert!((g - 0.5).abs() < 1e-15);
        let (l, g) = huber(2.0, 1.0);
        assert!((l - 1.5).abs() < 1e-15);
        assert_eq!(g, 1.0);
        let (l, g) = huber(-3.0, 1.0);
        assert!((l - 2.5).abs() < 1e-15);
        assert_eq!(g, -1.0);
    }

    /// A network with all-zero weights and a chosen head bias outputs those
    /// biases for every state, which makes the Bellman targets exact.
    fn constant_net(spec: &QNetworkSpec, biases: &[f64]) -> QNetworkParams {
        let mut params = QNetworkParams::init(spec, &mut Rng::new(1));
        params.values_mut().iter_mut().for_each(|v| *v = 0.0);
        let seg = params.index().head_b;
        let base = seg.offset;
        for (i, &b) in biases.iter().enumerate() {
            params.values_mut()[base + i] = b;
        }
        params
    }

    #[test]
    fn td_targets_match_hand_arithmetic_against_a_constant_net() {
        let spec = tiny_net_spec(2, 16, 2);
        let target = constant_net(&spec, &[0.3, 0.7]);

        let state = Matrix::zeros(2, 16);
        let live = Transition {
            state: state.clone(),
            action: 0,
            reward: 1.0,
            next_state: state.clone(),
            done: false,
        };
        let terminal = Transition {
            state: state.clone(),
            action: 1,
            reward: -2.0,
            next_state: Matrix::zeros(2, 16),
            done: true,
        };

        let batch = vec![&live, &terminal];
        let y = td_targets(&batch, &target, &spec, 0.99).unwrap();
        assert!((y[0] - (1.0 + 0.99 * 0.7)).abs() < 1e-12);
        assert!((y[1] - -2.0).abs() < 1e-12, "terminal keeps the raw reward");

        let y0 = td_targets(&batch, &target, &spec, 0.0).unwrap();
        assert_eq!(y0, vec![1.0, -2.0], "gamma 0 reduces to the rewards");

        assert!(td_targets(&batch, &target, &spec, 1.5).is_err());
    }

    #[test]
    fn training_consumes_exactly_the_requested_steps() {
        let mut rng = Rng::new(55);
        let spec = tiny_net_spec(2, 16, 2);
        let ds = grid_dataset(6, 2, 2, 16, &mut rng, 1.0);
        let mut env = ClassificationEnv::new(ds, RewardStructure::new(1.0, 0.0).unwrap());
        let mut params = QNetworkParams::init(&spec, &mut rng);
        let schedule = EpsilonSchedule::new(1.0, 0.0, 6.0).unwrap();
        let hyper = DqnHyper {
            warmup_steps: 10,
            batch_size: 4,
            ..DqnHyper::default()
        };

        let log = dqn_train(
            &mut env,
            &spec,
            &mut params,
            &schedule,
            &[30, 4, 4],
            &hyper,
            &mut rng,
        )
        .unwrap();

        assert_eq!(log.steps.len(), 38);
        assert_eq!(log.intervals.len(), 3);
        assert_eq!(log.intervals[0].steps, 30);
        assert_eq!(log.steps.last().unwrap().step, 38);

        // Exploration only in the first interval; epsilon 0 afterwards.
        assert!(log.steps[0].epsilon == 1.0);
        assert!(log
            .steps
            .iter()
            .filter(|s| s.interval > 0)
            .all(|s| s.epsilon == 0.0));

        // Updates start once the buffer holds warmup transitions.
        assert!(log.steps[..9].iter().all(|s| s.loss.is_none()));
        assert!(log.steps[10..].iter().all(|s| s.loss.is_some()));
    }

    #[test]
    fn a_fully_random_policy_earns_the_class_prior() {
        let mut rng = Rng::new(300);
        let spec = tiny_net_spec(2, 16, 3);
        let ds = grid_dataset(30, 3, 2, 16, &mut rng, 1.0);
        let mut env = ClassificationEnv::new(ds, RewardStructure::new(1.0, 0.0).unwrap());
        let mut params = QNetworkParams::init(&spec, &mut rng);
        // Epsilon pinned at 1 and warmup beyond the horizon: pure random
        // acting, no learning.
        let schedule = EpsilonSchedule::new(1.0, 1.0, 1000.0).unwrap();
        let hyper = DqnHyper {
            warmup_steps: usize::MAX,
            ..DqnHyper::default()
        };

        let log = dqn_train(
            &mut env,
            &spec,
            &mut params,
            &schedule,
            &[3000],
            &hyper,
            &mut rng,
        )
        .unwrap();

        let mean = log.intervals[0].mean_reward;
        let expected = 1.0 / 3.0;
        assert!(
            (mean - expected).abs() / expected < 0.05,
            "random policy earned {mean}, expected about {expected}"
        );
    }

    #[test]
    fn separable_features_are_learned_to_high_reward() {
        let mut rng = Rng::new(9001);
        let spec = tiny_net_spec(3, 16, 3);
        let ds = grid_dataset(30, 3, 3, 16, &mut rng, 3.0);
        let mut env = ClassificationEnv::new(ds, RewardStructure::new(1.0, 0.0).unwrap());
        let mut params = QNetworkParams::init(&spec, &mut rng);
        let schedule = EpsilonSchedule::new(1.0, 0.0, 400.0).unwrap();
        // Classification episodes chain statistically unrelated samples, so a
        // lighter discount shortens the value bootstrap ramp and lets the
        // action margins dominate sooner.
        let hyper = DqnHyper {
            gamma: 0.5,
            ..DqnHyper::default()
        };

        let log = dqn_train(
            &mut env,
            &spec,
            &mut params,
            &schedule,
            &[2000, 150, 150],
            &hyper,
            &mut rng,
        )
        .unwrap();

        let last = log.intervals.last().unwrap();
        assert!(
            last.mean_reward >= 0.95,
            "final exploitation interval earned {}, wanted >= 0.95",
            last.mean_reward
        );
        assert_eq!(log.refused_steps, 0);

        // The same policy should evaluate just as well greedily.
        let acc = evaluate_reward_accuracy(&mut env, &spec, &params, 10, &mut rng).unwrap();
        assert!(acc >= 0.95, "greedy evaluation {acc}");
    }

    #[test]
    fn mismatched_action_counts_are_rejected() {
        let mut rng = Rng::new(2);
        let spec = tiny_net_spec(2, 16, 4);
        let ds = grid_dataset(6, 2, 2, 16, &mut rng, 1.0);
        let mut env = ClassificationEnv::new(ds, RewardStructure::new(1.0, 0.0).unwrap());
        let mut params = QNetworkParams::init(&spec, &mut rng);
        let schedule = EpsilonSchedule::new(1.0, 0.0, 10.0).unwrap();
        let err = dqn_train(
            &mut env,
            &spec,
            &mut params,
            &schedule,
            &[10],
            &DqnHyper::default(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, RlError::InvalidParameter(_)));
    }

    #[test]
    fn single_class_dataset_evaluates_to_perfect_accuracy() {
        let mut rng = Rng::new(3);
        let spec = tiny_net_spec(2, 16, 1);
        let ds = grid_dataset(5, 1, 2, 16, &mut rng, 1.0);
        let mut env = ClassificationEnv::new(ds, RewardStructure::new(1.0, 0.0).unwrap());
        let params = QNetworkParams::init(&spec, &mut rng);
        let acc = evaluate_reward_accuracy(&mut env, &spec, &params, 3, &mut rng).unwrap();
        assert_eq!(acc, 1.0, "only one action exists, so every step is right");
    }

    #[test]
    fn constant_policy_earns_exactly_the_first_class_share() {
        let mut rng = Rng::new(4);
        let spec = tiny_net_spec(2, 16, 3);
        // 30 trials, labels cycle 0,1,2 — exactly a third are class 0.
        let ds = grid_dataset(30, 3, 2, 16, &mut rng, 1.0);
        let mut env = ClassificationEnv::new(ds, RewardStructure::new(1.0, 0.0).unwrap());
        // All-zero network: Q is identically zero, ties resolve to action 0.
        let params = constant_net(&spec, &[0.0, 0.0, 0.0]);
        let acc = evaluate_reward_accuracy(&mut env, &spec, &params, 5, &mut rng).unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reward_accuracy_equals_plain_accuracy_under_unit_reward() {
        let mut rng = Rng::new(5);
        let spec = tiny_net_spec(2, 16, 3);
        let ds = grid_dataset(21, 3, 2, 16, &mut rng, 1.0);

        for trial in 0..5 {
            let params = QNetworkParams::init(&spec, &mut Rng::new(100 + trial));
            // Direct accuracy of the greedy policy over the dataset.
            let mut correct = 0usize;
            for t in 0..ds.n_trials() {
                let (q, _) =
                    forward(&params, &spec, &[ds.trial_matrix(t)], Mode::Inference, None).unwrap();
                if greedy_action(&q[0]).unwrap() == ds.labels()[t] {
                    correct += 1;
                }
            }
            let direct = correct as f64 / ds.n_trials() as f64;

            let mut env =
                ClassificationEnv::new(ds.clone(), RewardStructure::new(1.0, 0.0).unwrap());
            let acc = evaluate_reward_accuracy(&mut env, &spec, &params, 4, &mut rng).unwrap();
            assert!(
                (acc - direct).abs() < 1e-12,
                "policy {trial}: reward accuracy {acc} vs direct {direct}"
            );
        }
    }

    #[test]
    fn zero_correct_reward_cannot_be_evaluated() {
        let mut rng = Rng::new(6);
        let spec = tiny_net_spec(2, 16, 2);
        let ds = grid_dataset(4, 2, 2, 16, &mut rng, 1.0);
        let mut env = ClassificationEnv::new(ds, RewardStructure::new(0.0, -1.0).unwrap());
        let params = QNetworkParams::init(&spec, &mut rng);
        assert!(matches!(
            evaluate_reward_accuracy(&mut env, &spec, &params, 2, &mut rng),
            Err(RlError::InvalidParameter(_))
        ));
    }
}
