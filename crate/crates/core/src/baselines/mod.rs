//! Reference classifiers: k-nearest neighbours, a CART decision tree and a
//! two-hidden-layer MLP.

mod knn;
mod tree;

use thiserror::Error;

pub use knn::{knn_fit, knn_predict, KnnModel, KnnVote};
pub use tree::{tree_fit, tree_fit_rows, tree_predict, TreeConfig, TreeNode};

use crate::ingest::FEATURE_LEN;
use crate::nn::{LayerSpec, Network, Shape};

pub const MLP_HIDDEN: usize = 68;
pub const MLP_PARAM_COUNT: usize = 5_986;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

/// 16 → 68 → 68 → 2 with ReLU hidden layers and a softmax output.
pub fn build_mlp(seed: u64) -> Network {
    let layers = vec![
        LayerSpec::dense(FEATURE_LEN, MLP_HIDDEN),
        LayerSpec::ReLU,
        LayerSpec::dense(MLP_HIDDEN, MLP_HIDDEN),
        LayerSpec::ReLU,
        LayerSpec::dense(MLP_HIDDEN, 2),
        LayerSpec::Softmax,
    ];
    let net = Network::new(Shape::Flat(FEATURE_LEN), layers, seed).expect("MLP layer stack is consistent");
    assert_eq!(net.param_count(), MLP_PARAM_COUNT);
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, Tensor, DEFAULT_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_parameter_count() {
        let net = build_mlp(0);
        assert_eq!(net.param_count(), 16 * 68 + 68 + 68 * 68 + 68 + 68 * 2 + 2);
        assert_eq!(net.param_count(), 5_986);
    }

    #[test]
    fn mlp_forward_and_gradients() {
        let net = build_mlp(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Tensor> = (0..4).map(|_| Tensor::flat((0..16).map(|_| rng.gen_range(0.0..1.0)).collect())).collect();
        for x in &xs {
            assert!((net.forward(x).unwrap().data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let r = grad_check(&net, &xs, &[0, 1, 1, 0], DEFAULT_STEP).unwrap();
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }
}
