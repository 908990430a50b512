//! Minimal differentiable training core: dense feed-forward classifier,
//! soft-target cross-entropy, Adam and a finite-difference gradient checker.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, grad_check_with, GradCheckOptions};
pub use loss::{cross_entropy, LOG_EPSILON};
pub use model::{Activation, Dense, ForwardCache, ModelParams};
pub use tensor::Matrix;
