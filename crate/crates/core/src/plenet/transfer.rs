use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::train::{train_with_frozen, TrainConfig, TrainHistory};
use super::PlenetError;
use crate::ingest::PreparedDataset;
use crate::nn::{LayerSpec, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreezeMode {
    /// Both convolution layers keep their source weights.
    ConvFrozen,
    None,
}

impl fmt::Display for FreezeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreezeMode::ConvFrozen => "conv-frozen",
            FreezeMode::None => "none",
        })
    }
}

impl FromStr for FreezeMode {
    type Err = PlenetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conv-frozen" | "conv" => Ok(FreezeMode::ConvFrozen),
            "none" => Ok(FreezeMode::None),
            _ => Err(PlenetError::InvalidConfig(format!("unknown freeze mode `{s}` (expected conv-frozen or none)"))),
        }
    }
}

/// Continues training a copy of `source` on `target`.
pub fn transfer_finetune(
    source: &Network,
    target: &PreparedDataset,
    cfg: &TrainConfig,
    freeze: FreezeMode,
) -> Result<(Network, TrainHistory), PlenetError> {
    let frozen: Vec<bool> = source.layers().iter().map(|l| freeze == FreezeMode::ConvFrozen && matches!(l, LayerSpec::Conv1D(_))).collect();
    train_with_frozen(source, target, cfg, &frozen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plenet::tests::separable;
    use crate::plenet::{build_plenet, evaluate_split, train};

    #[test]
    fn frozen_convs_are_bit_identical() {
        let data = separable(100, 7);
        let src = build_plenet(7);
        let cfg = TrainConfig { epochs: 3, seed: 7, ..Default::default() };
        let (tuned, _) = transfer_finetune(&src, &data, &cfg, FreezeMode::ConvFrozen).unwrap();
        for (i, l) in src.layers().iter().enumerate() {
            let before = src.params()[i].as_ref();
            let after = tuned.params()[i].as_ref();
            match l {
                LayerSpec::Conv1D(_) => {
                    let (b, a) = (before.unwrap(), after.unwrap());
                    assert!(b.weights.iter().zip(&a.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
                    assert!(b.biases.iter().zip(&a.biases).all(|(x, y)| x.to_bits() == y.to_bits()));
                }
                LayerSpec::Dense(_) => assert_ne!(before, after),
                _ => {}
            }
        }
    }

    #[test]
    fn warm_start_on_same_data_is_not_worse() {
        let data = separable(200, 8);
        let cfg = TrainConfig { epochs: 10, seed: 8, ..Default::default() };
        let (src, _) = train(&build_plenet(8), &data, &cfg).unwrap();
        let (_, src_acc) = evaluate_split(&src, &data.validation).unwrap();
        let (_, hist) = transfer_finetune(&src, &data, &cfg, FreezeMode::None).unwrap();
        assert!(hist.best().val_acc >= src_acc - 0.01);
    }

    #[test]
    fn freeze_mode_text() {
        for m in [FreezeMode::ConvFrozen, FreezeMode::None] {
            assert_eq!(m.to_string().parse::<FreezeMode>().unwrap(), m);
        }
        assert!("all".parse::<FreezeMode>().is_err());
    }
}
