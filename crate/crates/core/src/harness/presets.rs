//! Desk-scale defaults for scenarios, sweeps and CNN training.

use crate::channel::ScenarioConfig;
use crate::cnn::{Activation, TrainConfig};

/// Epoch count for desk-scale training runs (full scale uses 250).
pub const DESK_EPOCHS: usize = 100;

/// Monte-Carlo draws per sweep point.
pub const DEFAULT_DRAWS: usize = 20_000;

/// SNR grid in dB: −15 to 20 in steps of 5.
pub fn default_snr_values() -> Vec<f64> {
    (0..8).map(|k| -15.0 + 5.0 * k as f64).collect()
}

/// `S = 16`, `U = N = 2`, SNR 5 dB.
pub fn desk_scenario(num_clusters: usize) -> ScenarioConfig {
    ScenarioConfig {
        s: 16,
        u: 2,
        n: 2,
        num_clusters,
        ..Default::default()
    }
}

/// Default optimizer settings with the desk-scale epoch count.
pub fn desk_train_config(activation: Activation, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: DESK_EPOCHS,
        activation,
        seed,
        ..Default::default()
    }
}
