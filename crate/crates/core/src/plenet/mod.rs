//! The P-LeNet 1-D CNN: construction, training with early stopping, scoring,
//! domain distance and transfer fine-tuning.

mod mmd;
mod train;
mod transfer;

use thiserror::Error;

pub use mmd::{mmd_distance, DomainPair, FeatureMap};
pub use train::{
    evaluate_split, predict, to_tensor, train, train_with_frozen, EpochStats, Prediction, TrainConfig, TrainHistory, MAX_EPOCHS,
};
pub use transfer::{transfer_finetune, FreezeMode};

use crate::ingest::FEATURE_LEN;
use crate::nn::{LayerSpec, Network, NnError, Shape};

pub const PLENET_PARAM_COUNT: usize = 12_052;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlenetError {
    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("domain has no rows")]
    EmptyDomain,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Conv(5, k5) → ReLU → pool → Conv(20, k5) → ReLU → pool → flatten →
/// Dense(20→500) → ReLU → Dense(500→2) → softmax, over a 16×1 input.
pub fn plenet_layers() -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv1d(5, 5, 1),
        LayerSpec::ReLU,
        LayerSpec::MaxPool1D,
        LayerSpec::conv1d(20, 5, 5),
        LayerSpec::ReLU,
        LayerSpec::MaxPool1D,
        LayerSpec::Flatten,
        LayerSpec::dense(20, 500),
        LayerSpec::ReLU,
        LayerSpec::dense(500, 2),
        LayerSpec::Softmax,
    ]
}

pub fn plenet_input_shape() -> Shape {
    Shape::Seq { len: FEATURE_LEN, channels: 1 }
}

pub fn build_plenet(seed: u64) -> Network {
    let net = Network::new(plenet_input_shape(), plenet_layers(), seed).expect("P-LeNet layer stack is consistent");
    assert_eq!(net.param_count(), PLENET_PARAM_COUNT);
    net
}
