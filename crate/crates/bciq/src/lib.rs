//! Motor-imagery EEG classification pipeline.
//!
//! The crate implements the full chain from multichannel EEG trials to a
//! trained reinforcement-learning classifier:
//!
//! 1. [`dsp`] — Butterworth bandpass conditioning, epoching, and Welch
//!    spectral estimation.
//! 2. [`csp`] — one-versus-rest Common Spatial Patterns with a
//!    time-preserving component projection.
//! 3. [`features`] — statistical and band-power feature assembly plus
//!    train-fitted normalization.
//! 4. [`qnet`] — a 1D-CNN-LSTM Q-network with hand-written forward and
//!    backward passes and an Adam optimizer.
//! 5. [`rl`] — the classification environment, replay buffer, epsilon-greedy
//!    exploration, and the DQN training/evaluation loops.
//! 6. [`app`] — dataset container format, synthetic data generation,
//!    configuration, splitting, metrics, and the end-to-end pipeline.
//!
//! Everything is deterministic given a seed: randomness flows through the
//! [`mathcore::Rng`] streams only.

pub mod app;
pub mod csp;
pub mod dsp;
pub mod features;
pub mod mathcore;
pub mod qnet;
pub mod rl;
