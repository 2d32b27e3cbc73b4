//! The classification MDP and the DQN agent that learns it: an environment
//! that serves feature trials one at a time and rewards correct labels, an
//! epsilon-greedy policy with exponential decay, a replay buffer, and the
//! training/evaluation loops tying them to the Q-network.

mod env;
mod replay;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qnet::QNetError;

pub use env::ClassificationEnv;
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    dqn_train, evaluate_reward_accuracy, td_targets, DqnHyper, IntervalSummary, StepRecord,
    TrainingLog,
};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error(transparent)]
    QNet(#[from] QNetError),
}

/// The (r_correct, r_incorrect) pair shaping the MDP's feedback. Correct
/// answers must pay strictly more than wrong ones, and wrong answers never
/// pay a positive amount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct RewardStructure {
    r_correct: f64,
    r_incorrect: f64,
}

impl RewardStructure {
    pub fn new(r_correct: f64, r_incorrect: f64) -> Result<RewardStructure, RlError> {
        if !r_correct.is_finite() || !r_incorrect.is_finite() {
            return Err(RlError::InvalidParameter(
                "rewards must be finite".into(),
            ));
        }
        if r_incorrect > 0.0 {
            return Err(RlError::InvalidParameter(format!(
                "r_incorrect must be <= 0, got {r_incorrect}"
            )));
        }
        if r_correct <= r_incorrect {
            return Err(RlError::InvalidParameter(format!(
                "r_correct ({r_correct}) must exceed r_incorrect ({r_incorrect})"
            )));
        }
        Ok(RewardStructure {
            r_correct,
            r_incorrect,
        })
    }

    pub fn r_correct(&self) -> f64 {
        self.r_correct
    }

    pub fn r_incorrect(&self) -> f64 {
        self.r_incorrect
    }
}

impl TryFrom<(f64, f64)> for RewardStructure {
    type Error = RlError;

    fn try_from(pair: (f64, f64)) -> Result<RewardStructure, RlError> {
        RewardStructure::new(pair.0, pair.1)
    }
}

impl From<RewardStructure> for (f64, f64) {
    fn from(r: RewardStructure) -> (f64, f64) {
        (r.r_correct, r.r_incorrect)
    }
}

/// Exponentially decaying exploration rate:
/// `eps(t) = eps_end + (eps_start - eps_end) * exp(-t / tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    eps_start: f64,
    eps_end: f64,
    tau: f64,
}

impl EpsilonSchedule {
    pub fn new(eps_start: f64, eps_end: f64, tau: f64) -> Result<EpsilonSchedule, RlError> {
        if !(0.0..=1.0).contains(&eps_end)
            || !(0.0..=1.0).contains(&eps_start)
            || eps_end > eps_start
        {
            return Err(RlError::InvalidParameter(format!(
                "need 0 <= eps_end <= eps_start <= 1, got start {eps_start}, end {eps_end}"
            )));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(RlError::InvalidParameter(format!(
                "tau must be a positive number of steps, got {tau}"
            )));
        }
        Ok(EpsilonSchedule {
            eps_start,
            eps_end,
            tau,
        })
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        self.eps_end + (self.eps_start - self.eps_end) * (-(step as f64) / self.tau).exp()
    }
}

/// Index of the best action; ties break toward the lowest index.
pub fn greedy_action(q_values: &[f64]) -> Result<usize, RlError> {
    if q_values.is_empty() {
        return Err(RlError::InvalidParameter("no Q-values to rank".into()));
    }
    if q_values.iter().any(|q| !q.is_finite()) {
        return Err(RlError::Numeric("non-finite Q-value".into()));
    }
    let mut best = 0;
    for (i, &q) in q_values.iter().enumerate().skip(1) {
        if q > q_values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Discounted return of a reward sequence from its first step:
/// `sum_k gamma^k r_k`.
pub fn episode_return(rewards: &[f64], gamma: f64) -> Result<f64, RlError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(RlError::InvalidParameter(format!(
            "gamma {gamma} outside [0, 1]"
        )));
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for &r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reward_structure_enforces_its_invariants() {
        assert!(RewardStructure::new(1.0, 0.0).is_ok());
        assert!(RewardStructure::new(2.0, -2.0).is_ok());
        assert!(RewardStructure::new(0.25, -2.5).is_ok());
        assert!(RewardStructure::new(1.0, 1.0).is_err(), "equal rewards");
        assert!(RewardStructure::new(1.0, 0.5).is_err(), "positive penalty");
        assert!(RewardStructure::new(-1.0, 0.0).is_err(), "correct below incorrect");
        assert!(RewardStructure::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn epsilon_schedule_hits_the_documented_points() {
        let s = EpsilonSchedule::new(1.0, 0.0, 600.0).unwrap();
        assert_eq!(s.epsilon_at(0), 1.0);
        assert!((s.epsilon_at(600) - (-1.0f64).exp()).abs() < 1e-12);
        assert!(s.epsilon_at(1_000_000) < 1e-9, "decays to eps_end");

        let shifted = EpsilonSchedule::new(0.9, 0.1, 100.0).unwrap();
        assert!((shifted.epsilon_at(0) - 0.9).abs() < 1e-12);
        assert!((shifted.epsilon_at(10_000_000) - 0.1).abs() < 1e-9);
    }

    #[test]
    fn epsilon_schedule_rejects_bad_shapes() {
        assert!(EpsilonSchedule::new(0.5, 0.9, 100.0).is_err(), "end above start");
        assert!(EpsilonSchedule::new(1.5, 0.0, 100.0).is_err());
        assert!(EpsilonSchedule::new(1.0, -0.1, 100.0).is_err());
        assert!(EpsilonSchedule::new(1.0, 0.0, 0.0).is_err());
        assert!(EpsilonSchedule::new(1.0, 0.0, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn epsilon_never_increases_with_time(
            start in 0.0f64..=1.0,
            frac in 0.0f64..=1.0,
            tau in 1.0f64..10_000.0,
            t in 0u64..100_000,
            dt in 1u64..50_000,
        ) {
            let end = start * frac;
            let s = EpsilonSchedule::new(start, end, tau).unwrap();
            prop_assert!(s.epsilon_at(t) + 1e-15 >= s.epsilon_at(t + dt));
        }
    }

    #[test]
    fn greedy_action_follows_the_argmax_and_tie_rules() {
        assert_eq!(greedy_action(&[0.1, 0.9, 0.3]).unwrap(), 1);
        assert_eq!(greedy_action(&[0.5, 0.5]).unwrap(), 0);
        assert!(greedy_action(&[]).is_err());
        assert!(matches!(
            greedy_action(&[1.0, f64::INFINITY]),
            Err(RlError::Numeric(_))
        ));
    }

    proptest! {
        #[test]
        fn greedy_action_is_invariant_under_increasing_transforms(
            q in proptest::collection::vec(-50.0f64..50.0, 1..8),
            shift in -10.0f64..10.0,
        ) {
            let base = greedy_action(&q).unwrap();
            let shifted: Vec<f64> = q.iter().map(|v| v + shift).collect();
            prop_assert_eq!(greedy_action(&shifted).unwrap(), base);
            let warped: Vec<f64> = q.iter().map(|v| (v / 25.0).exp()).collect();
            prop_assert_eq!(greedy_action(&warped).unwrap(), base);
        }
    }

    #[test]
    fn episode_return_matches_the_discount_arithmetic() {
        assert_eq!(episode_return(&[1.0, 1.0, 1.0], 1.0).unwrap(), 3.0);
        assert_eq!(episode_return(&[2.0, 5.0, 7.0], 0.0).unwrap(), 2.0);
        assert!((episode_return(&[1.0, 1.0, 1.0], 0.5).unwrap() - 1.75).abs() < 1e-15);
        assert_eq!(episode_return(&[], 0.9).unwrap(), 0.0);
        assert!(episode_return(&[1.0], 1.5).is_err());
    }
}
