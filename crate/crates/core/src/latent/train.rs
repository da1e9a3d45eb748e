//! Training loop: shuffled mini-batches, ADAM with decoupled weight decay,
//! cosine-annealed learning rate.

use super::{LatentModel, SeqSample};
use crate::tensor::optim::{cosine_lr, Adam};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss became non-finite at epoch {epoch}, batch {batch} (lr {lr:.3e})")]
    NanLoss { epoch: usize, batch: usize, lr: f64 },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Optim(#[from] crate::tensor::optim::OptimError),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 150,
            base_lr: 1e-3,
            weight_decay: 1e-3,
            batch_size: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub neg_elbo: f64,
    pub reg_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub history: Vec<EpochStats>,
    pub ode_evals: u64,
}

/// Trains `model` in place on `data`. Deterministic for a fixed seed.
pub fn train(
    model: &mut LatentModel,
    data: &[SeqSample],
    tc: &TrainConfig,
) -> Result<TrainResult, TrainError> {
    assert!(!data.is_empty());
    let mut rng = ChaCha12Rng::seed_from_u64(tc.seed);
    let mut adam = Adam::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(tc.epochs);
    let evals_before = model.ode_evals;

    for epoch in 0..tc.epochs {
        let lr = cosine_lr(epoch, tc.epochs, tc.base_lr);
        order.shuffle(&mut rng);
        let mut elbo_acc = 0.0;
        let mut reg_acc = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(tc.batch_size).enumerate() {
            let batch: Vec<&SeqSample> = chunk.iter().map(|&i| &data[i]).collect();
            let stats = model.batch_gradients(&batch, &mut rng)?;
            if !stats.loss.is_finite() {
                return Err(TrainError::NanLoss { epoch, batch: batch_idx, lr });
            }
            adam.step(&mut model.params, lr, tc.weight_decay)?;
            elbo_acc += stats.neg_elbo;
            reg_acc += stats.reg_mse;
            batches += 1;
        }
        history.push(EpochStats {
            epoch,
            lr,
            neg_elbo: elbo_acc / batches as f64,
            reg_mse: reg_acc / batches as f64,
        });
    }

    Ok(TrainResult {
        history,
        ode_evals: model.ode_evals - evals_before,
    })
}

/// Writes the history as CSV: `epoch,lr,elbo,reg_mse`.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,lr,elbo,reg_mse\n");
    for h in history {
        out.push_str(&format!("{},{:.8e},{:.8e},{:.8e}\n", h.epoch, h.lr, h.neg_elbo, h.reg_mse));
    }
    out
}
