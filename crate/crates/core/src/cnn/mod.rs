//! Two-layer circular-convolution network acting on `ĉ`, its analytic
//! gradient, Adam, and the training loop.

mod adam;
mod network;
mod params;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use network::{cnn_backward, cnn_estimate, cnn_forward, output_gradient, sample_loss_and_grad, CnnEstimator, ForwardCache};
pub use params::{Activation, CnnGrads, CnnParams};
pub use train::{draw_training_sample, train, Sample, TrainConfig, TrainInit, TrainOutcome};
