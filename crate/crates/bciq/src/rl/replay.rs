//! Bounded experience store with FIFO eviction and uniform sampling.

use serde::{Deserialize, Serialize};

use crate::mathcore::{Matrix, Rng};

use super::RlError;

/// One environment interaction. `next_state` is all zeros when `done`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Matrix,
    pub action: usize,
    pub reward: f64,
    pub next_state: Matrix,
    pub done: bool,
}

/// Ring buffer of transitions: once full, each push overwrites the oldest
/// entry. Sampling is uniform with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<ReplayBuffer, RlError> {
        if capacity == 0 {
            return Err(RlError::InvalidParameter(
                "replay capacity must be positive".into(),
            ));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::new(),
            write: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.write] = transition;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    /// Draw `batch` transitions uniformly, with replacement, so any batch
    /// size works once the buffer holds at least one entry.
    pub fn sample(&self, rng: &mut Rng, batch: usize) -> Result<Vec<&Transition>, RlError> {
        if self.items.is_empty() {
            return Err(RlError::InsufficientData(
                "cannot sample from an empty replay buffer".into(),
            ));
        }
        Ok((0..batch)
            .map(|_| &self.items[rng.below(self.items.len())])
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}
