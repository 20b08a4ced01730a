//! Minimal neural-network kernel: 1-D convolution, max-pooling, dense, ReLU,
//! softmax, cross-entropy and Adam, with explicit forward and backward passes.

mod adam;
mod gradcheck;
mod layers;
mod network;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, adam_update, AdamHyper, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, DEFAULT_STEP};
pub use layers::{
    conv1d_backward, conv1d_backward_accumulate, conv1d_forward, cross_entropy, dense_backward, dense_backward_accumulate, dense_forward,
    log_sum_exp, maxpool1d_backward, maxpool1d_forward, one_hot, predict_class, relu, relu_backward, softmax, softmax_cross_entropy_grad,
    Conv1dSpec, DenseSpec, LayerParams, LayerSpec, PROB_FLOOR,
};
pub use network::{Network, Trace};
pub use tensor::{Shape, Tensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("target is not a valid one-hot vector")]
    InvalidOneHot,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
}
