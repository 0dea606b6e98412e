//! MIMO channel estimation with structured MMSE approximations and a learned
//! circular-convolution network.

pub mod channel;
pub mod cnn;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numerics;
pub mod pilots;
pub mod structure;

pub use error::{Error, Result};
