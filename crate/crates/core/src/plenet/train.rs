use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PlenetError;
use crate::canbus::Label;
use crate::ingest::{FeatureVector, PreparedDataset};
use crate::nn::{adam_step, log_sum_exp, predict_class, softmax, AdamHyper, AdamState, Network, Tensor};

pub const MAX_EPOCHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: MAX_EPOCHS, batch_size: 64, lr: 0.001, patience: 50, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PlenetError> {
        if self.epochs == 0 || self.epochs > MAX_EPOCHS {
            return Err(PlenetError::InvalidConfig(format!("epochs must be in 1..={MAX_EPOCHS}, got {}", self.epochs)));
        }
        if self.batch_size == 0 {
            return Err(PlenetError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(PlenetError::InvalidConfig("patience must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(PlenetError::InvalidConfig(format!("learning rate {} is not a finite non-negative number", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Index into `epochs` of the best validation accuracy (earliest on ties).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch]
    }

    /// `epoch,train_acc,val_acc,train_loss,val_loss` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_acc,val_acc,train_loss,val_loss\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.train_acc, e.val_acc, e.train_loss, e.val_loss));
        }
        s
    }
}

/// Class probabilities and the hard label for one row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_normal: f64,
    pub p_attack: f64,
    pub label: Label,
}

pub fn to_tensor(net: &Network, fv: &FeatureVector) -> Result<Tensor, PlenetError> {
    let shape = net.input_shape();
    if shape.size() != fv.x.len() {
        return Err(PlenetError::DimensionMismatch { expected: shape.size(), got: fv.x.len() });
    }
    Ok(Tensor::new(shape, fv.x.to_vec()))
}

pub fn predict(net: &Network, rows: &[FeatureVector]) -> Result<Vec<Prediction>, PlenetError> {
    if net.output_shape().size() != 2 {
        return Err(PlenetError::DimensionMismatch { expected: 2, got: net.output_shape().size() });
    }
    rows.iter()
        .map(|fv| {
            let p = net.forward(&to_tensor(net, fv)?)?.into_data();
            let label = if predict_class(&p) == 1 { Label::Attack } else { Label::Normal };
            Ok(Prediction { p_normal: p[0], p_attack: p[1], label })
        })
        .collect()
}

/// Mean loss and accuracy over `rows` with fixed parameters.
pub fn evaluate_split(net: &Network, rows: &[FeatureVector]) -> Result<(f64, f64), PlenetError> {
    if rows.is_empty() {
        return Err(PlenetError::EmptyPartition("evaluation"));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for fv in rows {
        let tr = net.trace(&to_tensor(net, fv)?)?;
        let y = fv.y.index();
        loss += log_sum_exp(tr.logits()) - tr.logits()[y];
        correct += usize::from(predict_class(&softmax(tr.logits())) == y);
    }
    Ok((loss / rows.len() as f64, correct as f64 / rows.len() as f64))
}

/// Mini-batch Adam with a seeded shuffle each epoch. Returns the parameters of
/// the epoch with the best validation accuracy.
pub fn train(net: &Network, data: &PreparedDataset, cfg: &TrainConfig) -> Result<(Network, TrainHistory), PlenetError> {
    train_with_frozen(net, data, cfg, &vec![false; net.layers().len()])
}

/// As [`train`], but layers flagged in `frozen` receive no updates.
pub fn train_with_frozen(
    net: &Network,
    data: &PreparedDataset,
    cfg: &TrainConfig,
    frozen: &[bool],
) -> Result<(Network, TrainHistory), PlenetError> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(PlenetError::EmptyPartition("train"));
    }
    if data.validation.is_empty() {
        return Err(PlenetError::EmptyPartition("validation"));
    }
    if frozen.len() != net.layers().len() {
        return Err(PlenetError::InvalidConfig(format!("{} freeze flags for {} layers", frozen.len(), net.layers().len())));
    }
    let xs: Vec<Tensor> = data.train.iter().map(|fv| to_tensor(net, fv)).collect::<Result<_, _>>()?;
    let ys: Vec<usize> = data.train.iter().map(|fv| fv.y.index()).collect();

    let mut model = net.clone();
    let mut state = AdamState::new(model.params(), AdamHyper { lr: cfg.lr, ..Default::default() });
    for (i, &f) in frozen.iter().enumerate() {
        if f {
            state.freeze(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grads = model.zero_grads();
    let mut bx: Vec<Tensor> = Vec::with_capacity(cfg.batch_size);
    let mut by: Vec<usize> = Vec::with_capacity(cfg.batch_size);

    let mut history = TrainHistory { epochs: Vec::new(), best_epoch: 0, stopped_early: false };
    let mut best_params = model.params().to_vec();
    let mut since_best = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            bx.extend(chunk.iter().map(|&i| xs[i].clone()));
            by.extend(chunk.iter().map(|&i| ys[i]));
            for g in grads.iter_mut().flatten() {
                g.weights.fill(0.0);
                g.biases.fill(0.0);
            }
            let (loss, hits) = model.loss_and_grad_into(&bx, &by, &mut grads)?;
            if !loss.is_finite() {
                return Err(PlenetError::NonFiniteLoss { epoch });
            }
            loss_sum += loss * chunk.len() as f64;
            correct += hits;
            adam_step(model.params_mut(), &grads, &mut state)?;
        }
        let (val_loss, val_acc) = evaluate_split(&model, &data.validation)?;
        if !val_loss.is_finite() {
            return Err(PlenetError::NonFiniteLoss { epoch });
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / xs.len() as f64,
            train_acc: correct as f64 / xs.len() as f64,
            val_loss,
            val_acc,
        });
        if epoch == 0 || val_acc > history.epochs[history.best_epoch].val_acc {
            history.best_epoch = epoch;
            best_params = model.params().to_vec();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = epoch + 1 < cfg.epochs;
                break;
            }
        }
    }
    model.set_params(best_params)?;
    Ok((model, history))
}
