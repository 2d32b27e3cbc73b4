//! The classification MDP: an episode walks a shuffled dataset, the agent
//! labels one trial per step, and the reward says whether it was right.

use crate::features::FeatureTensor;
use crate::mathcore::{Matrix, Rng};

use super::{RewardStructure, RlError};

/// Environment over a fixed dataset. Each episode reshuffles the trial
/// order; the observation is the current trial's feature matrix and the
/// episode ends when every trial has been labeled once. A fresh environment
/// starts finished, so the first episode must begin with [`reset`].
///
/// Empty datasets cannot exist ([`FeatureTensor`] rejects zero trials at
/// construction), so every environment has at least one sample.
///
/// [`reset`]: ClassificationEnv::reset
#[derive(Debug, Clone)]
pub struct ClassificationEnv {
    dataset: FeatureTensor,
    reward: RewardStructure,
    order: Vec<usize>,
    cursor: usize,
    episode_return: f64,
}

impl ClassificationEnv {
    pub fn new(dataset: FeatureTensor, reward: RewardStructure) -> ClassificationEnv {
        let n = dataset.n_trials();
        ClassificationEnv {
            dataset,
            reward,
            order: (0..n).collect(),
            cursor: n,
            episode_return: 0.0,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.dataset.n_trials()
    }

    /// One action per class.
    pub fn n_actions(&self) -> usize {
        self.dataset.n_classes()
    }

    pub fn reward_structure(&self) -> RewardStructure {
        self.reward
    }

    /// Rows and columns of every observation this environment serves.
    pub fn observation_shape(&self) -> (usize, usize) {
        let m = self.dataset.trial_matrix(0);
        (m.rows(), m.cols())
    }

    /// Whether the current episode has consumed every sample.
    pub fn done(&self) -> bool {
        self.cursor >= self.order.len()
    }

    /// Undiscounted reward accumulated in the current episode.
    pub fn episode_return(&self) -> f64 {
        self.episode_return
    }

    /// Start a new episode: reshuffle the visiting order, rewind, zero the
    /// return accumulator, and serve the first observation.
    pub fn reset(&mut self, rng: &mut Rng) -> Matrix {
        rng.shuffle(&mut self.order);
        self.cursor = 0;
        self.episode_return = 0.0;
        self.observation(0)
    }

    /// Label the current trial. Returns the next observation (zeros once
    /// the episode is done), the reward, and the done flag.
    pub fn step(&mut self, action: usize) -> Result<(Matrix, f64, bool), RlError> {
        if self.done() {
            return Err(RlError::State(
                "episode is over; reset the environment first".into(),
            ));
        }
        if action >= self.n_actions() {
            return Err(RlError::InvalidParameter(format!(
                "action {action} outside 0..{}",
                self.n_actions()
            )));
        }
        let label = self.dataset.labels()[self.order[self.cursor]];
        let reward = if action == label {
            self.reward.r_correct()
        } else {
            self.reward.r_incorrect()
        };
        self.episode_return += reward;
        self.cursor += 1;
        let done = self.done();
        let next = if done {
            let (rows, cols) = self.observation_shape();
            Matrix::zeros(rows, cols)
        } else {
            self.observation(self.cursor)
        };
        Ok((next, reward, done))
    }

    fn observation(&self, position: usize) -> Matrix {
        self.dataset.trial_matrix(self.order[position])
    }
}
